#include "fairk/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fairk/rng.hpp"

namespace fairk {

Dataset make_class_blobs(std::size_t classes, std::size_t features,
                         std::size_t per_class, double mean_radius,
                         double noise_sigma, double scale_tilt,
                         std::uint64_t seed) {
  require(classes >= 2, "make_class_blobs: need >= 2 classes");
  require(features >= 1 && per_class >= 1, "make_class_blobs: empty shape");
  Rng rng(derive_seed(seed, {stream_id(Stream::DataGen)}));

  // One unit direction per class, fixed before the samples are drawn.
  std::vector<double> means(classes * features);
  for (std::size_t c = 0; c < classes; ++c) {
    double norm = 0.0;
    for (std::size_t j = 0; j < features; ++j) {
      means[c * features + j] = rng.normal();
      norm += means[c * features + j] * means[c * features + j];
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < features; ++j) {
      means[c * features + j] *= mean_radius / norm;
    }
  }

  Dataset ds;
  ds.n = classes * per_class;
  ds.p = features;
  ds.x.resize(ds.n * features);
  ds.y.resize(ds.n);
  std::size_t r = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double scale = 1.0 + scale_tilt * static_cast<double>(c);
    for (std::size_t s = 0; s < per_class; ++s, ++r) {
      for (std::size_t j = 0; j < features; ++j) {
        ds.x[r * features + j] =
            scale * (means[c * features + j] + noise_sigma * rng.normal());
      }
      ds.y[r] = static_cast<double>(c);
    }
  }
  return ds;
}

Dataset make_regression_data(std::size_t samples, std::size_t features,
                             double noise_sigma, std::uint64_t seed) {
  require(samples >= 1 && features >= 1, "make_regression_data: empty shape");
  Rng rng(derive_seed(seed, {stream_id(Stream::DataGen), 1}));

  std::vector<double> w_true(features);
  for (auto& v : w_true) v = rng.normal();

  Dataset ds;
  ds.n = samples;
  ds.p = features;
  ds.x.resize(samples * features);
  ds.y.resize(samples);
  for (std::size_t r = 0; r < samples; ++r) {
    double pred = 0.0;
    for (std::size_t j = 0; j < features; ++j) {
      ds.x[r * features + j] = rng.normal();
      pred += ds.x[r * features + j] * w_true[j];
    }
    ds.y[r] = pred + noise_sigma * rng.normal();
  }
  return ds;
}

std::vector<std::vector<std::size_t>> dirichlet_partition(
    const std::vector<double>& labels, std::size_t clients, double alpha,
    std::uint64_t seed) {
  require(!labels.empty(), "dirichlet_partition: no samples");
  require(clients >= 1, "dirichlet_partition: need >= 1 client");
  require(alpha > 0.0, "dirichlet_partition: alpha must be > 0");

  double max_label = 0.0;
  for (double v : labels) max_label = std::max(max_label, v);
  const auto classes = static_cast<std::size_t>(max_label) + 1;

  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }

  Rng rng(derive_seed(seed, {stream_id(Stream::Partition)}));
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<std::vector<std::size_t>> parts(clients);
    for (std::size_t c = 0; c < classes; ++c) {
      auto rows = by_class[c];
      if (rows.empty()) continue;
      rng.shuffle(rows);
      const auto shares = rng.dirichlet(alpha, clients);
      // Quota split along the shuffled class rows: client n receives the
      // slice between the rounded cumulative boundaries.
      double cum = 0.0;
      std::size_t start = 0;
      for (std::size_t n = 0; n < clients; ++n) {
        cum += shares[n];
        const auto end = n + 1 == clients
                             ? rows.size()
                             : static_cast<std::size_t>(
                                   std::llround(cum * static_cast<double>(rows.size())));
        for (std::size_t i = start; i < std::min(end, rows.size()); ++i) {
          parts[n].push_back(rows[i]);
        }
        start = std::min(end, rows.size());
      }
    }
    const bool any_empty =
        std::any_of(parts.begin(), parts.end(),
                    [](const std::vector<std::size_t>& p) { return p.empty(); });
    if (!any_empty) {
      for (auto& p : parts) std::sort(p.begin(), p.end());
      return parts;
    }
  }
  throw std::runtime_error(
      "dirichlet_partition: a client stayed empty after 100 draws; "
      "increase alpha or the dataset size");
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("idx: truncated header in " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);

  const std::uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != 0x00000803) {
    throw std::runtime_error("idx: bad image magic in " + images_path);
  }
  const std::uint32_t count = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);

  const std::uint32_t lab_magic = read_be32(lab, labels_path);
  if (lab_magic != 0x00000801) {
    throw std::runtime_error("idx: bad label magic in " + labels_path);
  }
  const std::uint32_t lab_count = read_be32(lab, labels_path);
  require(lab_count == count, "idx: image/label count mismatch");

  Dataset ds;
  ds.n = count;
  ds.p = static_cast<std::size_t>(rows) * cols;
  ds.x.resize(ds.n * ds.p);
  ds.y.resize(ds.n);

  std::vector<unsigned char> buf(ds.p);
  for (std::size_t i = 0; i < ds.n; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(ds.p));
    if (!img) throw std::runtime_error("idx: truncated image data in " + images_path);
    for (std::size_t j = 0; j < ds.p; ++j) {
      ds.x[i * ds.p + j] = static_cast<double>(buf[j]) / 255.0;
    }
    char c;
    lab.read(&c, 1);
    if (!lab) throw std::runtime_error("idx: truncated label data in " + labels_path);
    ds.y[i] = static_cast<double>(static_cast<unsigned char>(c));
  }
  return ds;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);

  Dataset ds;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (used == 0) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header line
      }
      throw std::runtime_error("csv: non-numeric cell in " + path);
    }
    first = false;
    require(vals.size() >= 2, "csv: each row needs >= 1 feature and a label");
    if (ds.p == 0) {
      ds.p = vals.size() - 1;
    } else {
      require(vals.size() == ds.p + 1, "csv: ragged row widths");
    }
    for (std::size_t j = 0; j < ds.p; ++j) ds.x.push_back(vals[j]);
    ds.y.push_back(vals.back());
    ++ds.n;
  }
  ds.validate();
  return ds;
}

}  // namespace fairk
