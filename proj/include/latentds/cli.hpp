#ifndef LATENTDS_CLI_HPP
#define LATENTDS_CLI_HPP

#include <string>
#include <vector>

namespace latentds::cli {

// Defaults shared by every subcommand. A JSON config file can replace any of
// them; explicit flags always win. copies == 0 means "derive K from the
// demonstration dimension".
struct PipelineConfig {
  double mu = 0.8;
  double beta = 0.9;
  int max_layers = 100;
  double mse_stop = 1e-5;
  int copies = 0;
  double dt = 1e-2;
  double t_max = 0.0;  // <= 0 selects 50/rate
  double eps = 1e-2;
  double rate = 1.0;
  int radius = 1;
  double threshold = 1e-5;
  int jobs = 1;
  std::string out_dir;  // empty resolves to $LATENTDS_OUT_DIR, then "."
};

PipelineConfig load_config(const std::string& path);

// Entry points. The vector form takes the arguments without the program name
// and is what in-process tests drive. Returns the process exit code: 0 on
// success, 2 for input and usage errors, 3 for numerical failures.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace latentds::cli

#endif
