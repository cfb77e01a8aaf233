#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mppf/models.hpp"
#include "mppf/path.hpp"

namespace mppf {

struct MarkedEvent {
  double time = 0.0;
  double mark = 0.0;
};

struct DatasetMeta {
  ModelSpec model;  // model_id, x_star and the true theta used for generation
  int data_level = 0;
  std::uint64_t seed = 0;
};

/// Event times s_k in (0, T], strictly increasing, with their marks.
struct MarkedDataset {
  long horizon_T = 0;
  std::vector<MarkedEvent> events;
  DatasetMeta meta;

  /// Throws ValidationError on non-increasing or out-of-horizon times.
  void validate() const;

  /// n_t: number of events in (0, t].
  long count_upto(double t) const;
};

struct GeneratedData {
  MarkedDataset dataset;
  std::vector<UnitPath> truth;  // one path per unit interval, at data_level
};

/// Simulates the hidden diffusion at data_level and draws the marked point
/// process by thinning on each sub-step against the endpoint-max intensity of
/// the interpolated path.
GeneratedData generate_dataset(const ModelSpec& spec, long horizon_T, int data_level,
                               std::uint64_t seed);

void write_dataset(const MarkedDataset& ds, std::ostream& out);
void write_dataset(const MarkedDataset& ds, const std::string& path);
MarkedDataset read_dataset(std::istream& in);
MarkedDataset read_dataset(const std::string& path);

/// Writes the truth grid as `t,x` rows.
void write_truth(const std::vector<UnitPath>& truth, std::ostream& out);

/// 17 significant digits; parses back to the identical double.
std::string format_real(double v);

}  // namespace mppf
