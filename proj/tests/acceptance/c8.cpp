// Criterion 8: the data-fraction sweep over {0.25, 0.5, 1.0} writes a
// three-row curve per objective, and distillation-regularized fine-tuning on
// the full set is at least as good as on a quarter of it on a majority of
// three seeds.

#include "dcm/emitters.hpp"
#include "harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

using namespace dcm;
namespace fs = std::filesystem;

int main() {
  acceptance::Checker checker;
  const std::vector<double> fractions{0.25, 0.5, 1.0};
  const fs::path dir = fs::temp_directory_path() / "dcm_acceptance_c8";
  fs::remove_all(dir);
  fs::create_directories(dir);

  int improved = 0;
  bool curves_ok = true;
  for (std::uint64_t seed : acceptance::kSeeds) {
    const acceptance::World w = acceptance::make_world(seed, 80, 1.0);
    const MetricModel teacher = pretrain(init_model(w.model), w.pretrain, acceptance::toy_pretrain(seed)).last;
    const SweepReport report =
        run_data_fraction_sweep(teacher, w.finetune, w.eval, acceptance::toy_finetune(seed), fractions);

    for (FinetuneObjective o : all_finetune_objectives()) {
      const fs::path file = dir / ("seed" + std::to_string(seed) + "." + to_string(o) + ".csv");
      emit_sweep_curves(SweepReport{report.curve(o)}, file);
      std::ifstream in(file);
      std::string line;
      std::getline(in, line);
      int rows = 0;
      bool ordered = line == "objective,fraction,avg_correlation";
      while (std::getline(in, line)) {
        ordered &= line.rfind(to_string(o) + ",", 0) == 0;
        ++rows;
      }
      curves_ok &= ordered && rows == 3;
    }
    const auto kd = report.curve(FinetuneObjective::kd_mse);
    improved += kd.back().report.average >= kd.front().report.average;
    std::printf("  seed %llu:", static_cast<unsigned long long>(seed));
    for (const auto& row : report.rows)
      std::printf(" %s@%.2f=%.4f", to_string(row.objective).c_str(), row.fraction, row.report.average);
    std::printf("\n");
  }
  checker.check("one three-row curve file per objective", curves_ok, "3 seeds x 3 objectives");
  checker.check("kd_mse at fraction 1.0 >= at 0.25", improved >= 2, std::to_string(improved) + "/3 seeds");
  fs::remove_all(dir);
  return checker.exit_code();
}
