// Stand-in generator speaking the file bridge. Behaviour is chosen by the
// TVR_STUB_MODE environment variable:
//   fill (default)  generated.png = cropped with masked pixels set to 128
//   fail            print a diagnostic and exit 3
//   nofile          exit 0 without writing anything
//   wrongsize       write a generated.png of half the input side

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "tvr/png_io.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: bridge_stub <workspace>\n";
    return 64;
  }
  const std::filesystem::path dir(argv[1]);
  const char* env = std::getenv("TVR_STUB_MODE");
  const std::string mode = env ? env : "fill";
  if (mode == "fail") {
    std::cerr << "stub generator: simulated failure\n";
    return 3;
  }
  if (mode == "nofile") return 0;
  try {
    auto cropped = tvr::read_rgb8(dir / "cropped.png");
    const auto mask = tvr::read_rgb8(dir / "mask.png");
    if (mode == "wrongsize") {
      const int half = cropped.width / 2;
      tvr::Rgb8 small{half, half, std::vector<std::uint8_t>(static_cast<std::size_t>(half) * half * 3, 0)};
      tvr::atomic_write(dir / "generated.png", tvr::encode_rgb8(small));
      return 0;
    }
    for (std::size_t i = 0; i < cropped.pixels.size(); ++i)
      if (mask.pixels[i] == 255) cropped.pixels[i] = 128;
    tvr::atomic_write(dir / "generated.png", tvr::encode_rgb8(cropped));
  } catch (const std::exception& e) {
    std::cerr << "stub generator: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
