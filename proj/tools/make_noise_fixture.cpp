// Writes a synthetic drive log whose error magnitudes fit to the default
// noise parameters.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "aim/noise.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthesize a drive log for estimate-noise"};
  std::string out;
  std::size_t samples = 20000;
  std::uint64_t seed = 1;
  app.add_option("--out", out, "Log file to write")->required();
  app.add_option("--samples", samples, "Samples at 10 Hz");
  app.add_option("--seed", seed, "Random seed");
  CLI11_PARSE(app, argc, argv);

  std::ofstream f(out);
  if (!f) {
    std::cerr << "cannot write " << out << '\n';
    return 2;
  }
  aim::write_drive_log(f, aim::synthesize_drive_log(aim::default_params(), samples, seed));
  return 0;
}
