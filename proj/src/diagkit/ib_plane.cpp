#include "multiexit/diagkit/ib_plane.hpp"

#include "multiexit/common/csv.hpp"

namespace multiexit::diagkit {

std::vector<IbPoint> ib_plane(const exitnet::MultiExitNetwork& net, const Dataset& data,
                              int bins) {
  const int n = static_cast<int>(data.size());
  Samples input;
  input.rows = n;
  input.cols = data.feature_dim;
  input.values = data.features;
  const Samples labels = Samples::column(data.labels);

  std::vector<IbPoint> points;
  std::vector<double> h = data.features;
  int next_exit = 0;
  const int k = net.exit_count();
  auto emit = [&](int ordinal, int attach, const std::vector<double>& embedding, int dim) {
    Samples f;
    f.rows = n;
    f.cols = dim;
    f.values = embedding;
    IbPoint point;
    point.exit_ordinal = ordinal;
    point.attach_index = attach;
    point.mi_input_bits = estimate_mutual_information(input, f, bins);
    point.mi_label_bits = estimate_mutual_information(labels, f, bins);
    point.bins = bins;
    point.sample_count = n;
    points.push_back(point);
  };

  for (int i = 1; i <= net.depth(); ++i) {
    h = net.backbone()[i - 1].eval(h, n);
    while (next_exit < k && net.attach_index(next_exit) == i) {
      emit(next_exit, i, h, net.backbone()[i - 1].out_dim);
      ++next_exit;
    }
  }
  emit(k, net.depth(), h, net.class_count());
  return points;
}

void save_ib_points_csv(const std::vector<IbPoint>& points, const std::string& path) {
  CsvWriter w(path, {"exit", "attach", "I_X", "I_Y", "bins", "n"});
  for (const auto& p : points) {
    w.row({std::to_string(p.exit_ordinal), std::to_string(p.attach_index),
           fmt_double(p.mi_input_bits), fmt_double(p.mi_label_bits), std::to_string(p.bins),
           std::to_string(p.sample_count)});
  }
}

}  // namespace multiexit::diagkit
