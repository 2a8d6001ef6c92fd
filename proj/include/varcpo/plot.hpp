#ifndef VARCPO_PLOT_HPP_
#define VARCPO_PLOT_HPP_

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace varcpo {

class PlotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Numeric column; throws PlotError naming the column when absent.
  std::vector<double> column(const std::string& name) const;
};

/// Reads a comma-separated file with a header row. Empty files, files with
/// no data rows and ragged rows are errors.
CsvTable read_csv(const std::filesystem::path& path);

/// Mean and sample standard deviation across runs, aligned by row and cut
/// to the shortest run.
struct Band {
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> stddev;
};

Band aggregate(const std::vector<CsvTable>& runs, const std::string& column, const std::string& x_column = "env_steps");

struct Panel {
  std::string column;
  std::string title;
  std::string file;
};

/// reward return, expected cost return, 95th-percentile cost, ice visitation.
const std::vector<Panel>& standard_panels();

std::string render_svg(const Panel& panel, const Band& band);

/// Writes one SVG per standard panel into `out_dir`; returns the paths.
std::vector<std::filesystem::path> write_plots(const std::vector<std::filesystem::path>& inputs,
                                               const std::filesystem::path& out_dir);

}  // namespace varcpo

#endif  // VARCPO_PLOT_HPP_
