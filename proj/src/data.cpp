#include "rdlda/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace rdlda {

namespace {

bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r'))
    --end;
  if (begin == end) return false;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv: " + path);

  std::vector<std::vector<std::string>> rows;
  std::vector<int> row_lines;
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  bool header_checked = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto cells = split_csv_line(line);
    if (!header_checked) {
      header_checked = true;
      // Header auto-detection: any non-numeric first-line cell.
      bool numeric = true;
      double tmp;
      for (const auto& c : cells)
        if (!parse_double(c, tmp)) numeric = false;
      if (!numeric) {
        header = cells;
        for (auto& h : header) {
          while (!h.empty() && (h.back() == '\r' || h.back() == ' '))
            h.pop_back();
        }
        continue;
      }
    }
    rows.push_back(std::move(cells));
    row_lines.push_back(line_no);
  }
  if (rows.empty()) throw std::runtime_error("csv has no data rows: " + path);

  int label_idx;
  if (std::holds_alternative<int>(schema.label_column)) {
    label_idx = std::get<int>(schema.label_column);
  } else {
    const auto& name = std::get<std::string>(schema.label_column);
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::runtime_error("label column '" + name + "' not in header");
    label_idx = static_cast<int>(it - header.begin());
  }

  const auto width = rows.front().size();
  if (label_idx < 0 || label_idx >= static_cast<int>(width))
    throw std::runtime_error("label column index out of range");

  Dataset ds;
  ds.provenance = path;
  ds.features = Matrix(rows.size(), width - 1);
  int max_label = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width)
      throw std::runtime_error("line " + std::to_string(row_lines[r]) +
                               ": expected " + std::to_string(width) +
                               " cells, got " + std::to_string(rows[r].size()));
    int col = 0;
    for (std::size_t cidx = 0; cidx < width; ++cidx) {
      double v;
      if (!parse_double(rows[r][cidx], v))
        throw std::runtime_error("line " + std::to_string(row_lines[r]) +
                                 ": non-numeric cell '" + rows[r][cidx] + "'");
      if (static_cast<int>(cidx) == label_idx) {
        const int y = static_cast<int>(std::llround(v));
        if (std::abs(v - y) > 1e-9 || y < 0)
          throw std::runtime_error("line " + std::to_string(row_lines[r]) +
                                   ": label must be a non-negative integer");
        ds.labels.push_back(y);
        max_label = std::max(max_label, y);
      } else {
        ds.features(static_cast<Eigen::Index>(r), col++) = v;
      }
    }
  }
  ds.class_count = max_label + 1;
  return ds;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= std::uint32_t(static_cast<unsigned char>(bytes.at(pos + i)))
         << (8 * i);
  return v;
}

constexpr char kImageMagic[5] = {'R', 'D', 'I', 'M', '1'};

}  // namespace

Dataset load_image_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image tensor: " + path);
  std::string raw((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (raw.size() < sizeof(kImageMagic) + 16 + 4 ||
      std::memcmp(raw.data(), kImageMagic, sizeof(kImageMagic)) != 0)
    throw std::runtime_error("image tensor: bad magic");
  const std::size_t base = sizeof(kImageMagic);
  const std::uint32_t n = get_u32(raw, base);
  const std::uint32_t channels = get_u32(raw, base + 4);
  const std::uint32_t h = get_u32(raw, base + 8);
  const std::uint32_t w = get_u32(raw, base + 12);
  const std::size_t pixels = std::size_t(n) * channels * h * w;
  if (raw.size() != base + 16 + pixels + 4)
    throw std::runtime_error("image tensor: size mismatch (truncated?)");
  const std::uint32_t stored = get_u32(raw, base + 16 + pixels);
  if (crc32(raw.data() + base, 16 + pixels) != stored)
    throw std::runtime_error("image tensor: checksum mismatch");

  Dataset ds;
  ds.image_mode = true;
  ds.image_shape = {int(channels), int(h), int(w)};
  ds.provenance = path;
  ds.features = Matrix(n, channels * h * w);
  const char* px = raw.data() + base + 16;
  for (std::uint32_t s = 0; s < n; ++s)
    for (std::uint32_t j = 0; j < channels * h * w; ++j)
      ds.features(s, j) =
          static_cast<unsigned char>(px[std::size_t(s) * channels * h * w + j]) /
          255.0;
  ds.labels.assign(n, 0);
  ds.class_count = 1;
  return ds;
}

void save_image_tensor(const Dataset& ds, const std::string& path) {
  if (!ds.image_mode)
    throw std::invalid_argument("save_image_tensor: dataset is not image mode");
  std::string payload;
  put_u32(payload, std::uint32_t(ds.size()));
  put_u32(payload, std::uint32_t(ds.image_shape.channels));
  put_u32(payload, std::uint32_t(ds.image_shape.height));
  put_u32(payload, std::uint32_t(ds.image_shape.width));
  for (Eigen::Index s = 0; s < ds.size(); ++s)
    for (Eigen::Index j = 0; j < ds.dim(); ++j)
      payload.push_back(
          char(std::lround(std::clamp(ds.features(s, j), 0.0, 1.0) * 255.0)));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image tensor: " + path);
  out.write(kImageMagic, sizeof(kImageMagic));
  out.write(payload.data(), std::streamsize(payload.size()));
  std::string tail;
  put_u32(tail, crc32(payload.data(), payload.size()));
  out.write(tail.data(), 4);
}

FeatureStats feature_stats(const Dataset& train) {
  FeatureStats stats;
  stats.mean = train.features.colwise().mean();
  stats.std = Vector(train.dim());
  for (Eigen::Index j = 0; j < train.dim(); ++j) {
    const double var =
        (train.features.col(j).array() - stats.mean(j)).square().mean();
    stats.std(j) = std::max(std::sqrt(var), 1e-8);
  }
  return stats;
}

Dataset normalize(const Dataset& ds, const FeatureStats& stats) {
  if (stats.mean.size() != ds.dim())
    throw std::invalid_argument("normalize: stats width mismatch");
  Dataset out = ds;
  for (Eigen::Index j = 0; j < ds.dim(); ++j)
    out.features.col(j) =
        (ds.features.col(j).array() - stats.mean(j)) / stats.std(j);
  return out;
}

Dataset augment_hflip(const Dataset& ds, double probability,
                      std::uint64_t seed, int epoch) {
  if (!ds.image_mode)
    throw std::invalid_argument("augment_hflip: dataset is not image mode");
  Dataset out = ds;
  const int channels = ds.image_shape.channels;
  const int h = ds.image_shape.height;
  const int w = ds.image_shape.width;
  SeedSplitter split{seed};
  for (Eigen::Index s = 0; s < ds.size(); ++s) {
    std::mt19937_64 rng(
        split.stream("hflip", (std::uint64_t(epoch) << 32) | std::uint64_t(s)));
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    if (dist(rng) >= probability) continue;
    for (int c = 0; c < channels; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w / 2; ++x) {
          const int a = c * h * w + y * w + x;
          const int b = c * h * w + y * w + (w - 1 - x);
          std::swap(out.features(s, a), out.features(s, b));
        }
  }
  return out;
}

std::vector<LabeledBatch> make_batches(const Dataset& ds,
                                       const BatchPlan& plan, int epoch) {
  if (plan.batch_size <= 0)
    throw std::invalid_argument("make_batches: batch_size must be positive");
  const int c = ds.class_count;
  const auto n = ds.size();
  if (plan.stratified && plan.batch_size < c)
    throw std::invalid_argument(
        "make_batches: stratified batches need batch_size >= class count");

  SeedSplitter split{plan.seed};
  std::mt19937_64 rng(split.stream("batching", std::uint64_t(epoch)));

  std::vector<std::vector<int>> by_class(std::max(c, 1));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  int batch_count =
      plan.drop_last ? int(n) / plan.batch_size
                     : int((n + plan.batch_size - 1) / plan.batch_size);
  if (batch_count == 0)
    throw std::invalid_argument("make_batches: dataset smaller than one batch");

  std::vector<std::vector<int>> batch_indices(batch_count);
  if (!plan.stratified) {
    const int used = plan.drop_last ? batch_count * plan.batch_size : int(n);
    for (int i = 0; i < used; ++i)
      batch_indices[std::min(i / plan.batch_size, batch_count - 1)].push_back(
          order[i]);
  } else {
    for (int i : order) by_class[ds.labels[i]].push_back(i);
    for (int j = 0; j < c; ++j) {
      if (static_cast<int>(by_class[j].size()) < batch_count)
        throw std::invalid_argument(
            "make_batches: class " + std::to_string(j) + " has only " +
            std::to_string(by_class[j].size()) + " samples for " +
            std::to_string(batch_count) + " stratified batches");
    }
    // Per-class quotas: each class is dealt round-robin across the batches,
    // so per-batch counts differ by at most one and every batch holds at
    // least one sample of every class. With drop_last each class keeps only
    // floor(m_j / batch_count) samples per batch so all batches match.
    for (int j = 0; j < c; ++j) {
      const int m = static_cast<int>(by_class[j].size());
      const int keep = plan.drop_last ? (m / batch_count) * batch_count : m;
      for (int t = 0; t < keep; ++t)
        batch_indices[t % batch_count].push_back(by_class[j][t]);
    }
  }

  std::vector<LabeledBatch> batches;
  for (auto& idx : batch_indices) {
    std::sort(idx.begin(), idx.end());
    LabeledBatch batch;
    batch.class_count = c;
    batch.features = Matrix(idx.size(), ds.dim());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      batch.features.row(static_cast<Eigen::Index>(i)) =
          ds.features.row(idx[i]);
      batch.labels.push_back(ds.labels[idx[i]]);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

Dataset make_synthetic(const SyntheticSpec& spec, const std::string& split_tag) {
  if (spec.class_count < 2 || spec.per_class < 1 || spec.dim < 1)
    throw std::invalid_argument("make_synthetic: invalid spec");
  SeedSplitter split{spec.seed};
  std::mt19937_64 center_rng(split.stream("centers"));
  std::mt19937_64 noise_rng(split.stream("noise:" + split_tag));
  std::normal_distribution<double> gauss;

  const bool multimodal = spec.kind == "multimodal";
  if (!multimodal && spec.kind != "gaussians")
    throw std::invalid_argument("make_synthetic: unknown kind " + spec.kind);

  Dataset ds;
  ds.class_count = spec.class_count;
  ds.provenance = "synthetic:" + spec.kind;
  ds.split = split_tag;
  ds.features = Matrix(spec.class_count * spec.per_class, spec.dim);

  // One random unit direction per (class, blob), scaled by the separation.
  const int blobs = multimodal ? 2 : 1;
  Matrix centers(spec.class_count * blobs, spec.dim);
  for (Eigen::Index r = 0; r < centers.rows(); ++r) {
    Vector dir(spec.dim);
    for (int j = 0; j < spec.dim; ++j) dir(j) = gauss(center_rng);
    centers.row(r) = spec.separation * dir.normalized().transpose();
  }

  Eigen::Index row = 0;
  for (int cls = 0; cls < spec.class_count; ++cls) {
    for (int i = 0; i < spec.per_class; ++i) {
      const int blob = multimodal ? (i % 2) : 0;
      for (int j = 0; j < spec.dim; ++j)
        ds.features(row, j) =
            centers(cls * blobs + blob, j) + gauss(noise_rng);
      ds.labels.push_back(cls);
      ++row;
    }
  }
  return ds;
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec spec;
  std::stringstream ss(text);
  std::string token;
  bool first = true;
  while (std::getline(ss, token, ',')) {
    if (first) {
      spec.kind = token;
      first = false;
      continue;
    }
    const auto eq = token.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("synthetic spec: expected key=value, got '" +
                                  token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    try {
      if (key == "c") spec.class_count = std::stoi(value);
      else if (key == "n") spec.per_class = std::stoi(value);
      else if (key == "d") spec.dim = std::stoi(value);
      else if (key == "sep") spec.separation = std::stod(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else throw std::invalid_argument("synthetic spec: unknown key " + key);
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception&) {
      throw std::invalid_argument("synthetic spec: bad value for " + key);
    }
  }
  return spec;
}

}  // namespace rdlda
