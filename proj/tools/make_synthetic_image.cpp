// Writes the bundled synthetic test image as an 8-bit binary PGM.
//   make_synthetic_image out.pgm [side]

#include <iostream>
#include <string>

#include "mpsenc/targets.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_synthetic_image out.pgm [side]\n";
    return 2;
  }
  const std::size_t side = argc > 2 ? std::stoul(argv[2]) : 128;
  try {
    mpsenc::targets::write_pgm(argv[1], mpsenc::targets::synthetic_chest_image(side));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
