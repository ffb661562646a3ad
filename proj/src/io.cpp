#include "sfmc/io.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace sfmc {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == delim || (delim == '\t' && c == ' ')) {
      if (!cur.empty() || delim != '\t') fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) fields.push_back(cur);
  // drop empty fields produced by comma splits of trailing separators
  while (!fields.empty() && fields.back().empty()) fields.pop_back();
  return fields;
}

bool parse_long(const std::string& s, long& out) {
  try {
    size_t pos = 0;
    out = std::stol(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool parse_double(const std::string& s, double& out) {
  try {
    size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

bool parse_llong(const std::string& s, long long& out) {
  try {
    size_t pos = 0;
    out = std::stoll(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

}  // namespace

RatingsTriplets load_triplets(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw InputError("load_triplets: cannot open " + path);

  RatingsTriplets out;
  std::unordered_set<long long> seen;
  std::vector<std::string> duplicates;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    char delim = delimiter;
    if (delim == '\0') delim = line.find('\t') != std::string::npos ? '\t'
                              : line.find(',') != std::string::npos ? ','
                                                                    : '\t';
    auto fields = split_line(line, delim);
    if (fields.size() < 3 || fields.size() > 4)
      throw InputError("load_triplets: malformed line " + std::to_string(lineno) + " in " + path +
                       " (expected 3 or 4 fields, got " + std::to_string(fields.size()) + ")");
    RatingTriplet t;
    if (!parse_long(fields[0], t.user) || !parse_long(fields[1], t.item) ||
        !parse_double(fields[2], t.rating))
      throw InputError("load_triplets: malformed line " + std::to_string(lineno) + " in " + path);
    if (t.user < 1 || t.item < 1)
      throw InputError("load_triplets: line " + std::to_string(lineno) +
                       ": user and item ids must be >= 1");
    if (!std::isfinite(t.rating))
      throw InputError("load_triplets: line " + std::to_string(lineno) + ": non-finite rating");
    if (fields.size() == 4) {
      if (!parse_llong(fields[3], t.timestamp))
        throw InputError("load_triplets: malformed timestamp on line " + std::to_string(lineno));
      t.has_timestamp = true;
    }
    const long long key = (static_cast<long long>(t.user) << 32) | static_cast<long long>(t.item);
    if (!seen.insert(key).second)
      duplicates.push_back("(" + std::to_string(t.user) + "," + std::to_string(t.item) + ")");
    out.rows.push_back(t);
    out.n1 = std::max<Index>(out.n1, t.user);
    out.n2 = std::max<Index>(out.n2, t.item);
  }
  if (!duplicates.empty()) {
    std::string msg = "load_triplets: duplicate (user,item) pairs in " + path + ":";
    for (std::size_t i = 0; i < duplicates.size() && i < 10; ++i) msg += " " + duplicates[i];
    if (duplicates.size() > 10) msg += " ... (" + std::to_string(duplicates.size()) + " total)";
    throw InputError(msg);
  }
  return out;
}

void save_triplets(const std::string& path, const RatingsTriplets& t, char delimiter) {
  std::ofstream out(path);
  if (!out) throw InputError("save_triplets: cannot write " + path);
  out.precision(17);
  for (const auto& row : t.rows) {
    out << row.user << delimiter << row.item << delimiter << row.rating;
    if (row.has_timestamp) out << delimiter << row.timestamp;
    out << "\n";
  }
}

MaskedData to_masked(const RatingsTriplets& t) {
  MaskedData data;
  data.x = Mat::Constant(t.n1, t.n2, std::numeric_limits<double>::quiet_NaN());
  data.w = Mat::Zero(t.n1, t.n2);
  for (const auto& row : t.rows) {
    data.x(row.user - 1, row.item - 1) = row.rating;
    data.w(row.user - 1, row.item - 1) = 1.0;
  }
  return data;
}

Mat predict_clipped(const Mat& m_hat, double lo, double hi) {
  if (lo > hi) throw InputError("predict_clipped: lo > hi");
  return m_hat.cwiseMax(lo).cwiseMin(hi);
}

double mspe(const RatingsTriplets& test, const Mat& m_pre) {
  if (test.rows.empty()) throw InputError("mspe: empty test set");
  double total = 0.0;
  for (const auto& row : test.rows) {
    if (row.user > m_pre.rows() || row.item > m_pre.cols())
      throw InputError("mspe: test cell (" + std::to_string(row.user) + "," +
                       std::to_string(row.item) + ") outside fitted dimensions");
    const double d = row.rating - m_pre(row.user - 1, row.item - 1);
    total += d * d;
  }
  return total / test.rows.size();
}

double percentile_rank_bar(const RatingsTriplets& test, const Mat& m_pre) {
  if (test.rows.empty()) throw InputError("percentile_rank_bar: empty test set");
  std::map<long, std::vector<const RatingTriplet*>> by_user;
  for (const auto& row : test.rows) {
    if (row.user > m_pre.rows() || row.item > m_pre.cols())
      throw InputError("percentile_rank_bar: test cell outside fitted dimensions");
    by_user[row.user].push_back(&row);
  }
  double num = 0.0, den = 0.0;
  for (const auto& [user, items] : by_user) {
    const std::size_t t = items.size();
    for (const RatingTriplet* it : items) {
      double rank = 0.0;
      if (t > 1) {
        const double p = m_pre(it->user - 1, it->item - 1);
        int higher = 0, tied = 0;
        for (const RatingTriplet* other : items) {
          if (other == it) continue;
          const double q = m_pre(other->user - 1, other->item - 1);
          if (q > p)
            ++higher;
          else if (q == p)
            ++tied;
        }
        rank = (higher + 0.5 * tied) / static_cast<double>(t - 1);
      }
      num += it->rating * rank;
      den += it->rating;
    }
  }
  if (den == 0.0) throw NumericalError("percentile_rank_bar: zero total test rating");
  return num / den;
}

double subspace_distance(const Mat& v1, const Mat& v2, Index k) {
  const Index d1 = v1.cols(), d2 = v2.cols();
  if (!(k >= 1 && k <= d1 && d1 <= d2))
    throw InputError("subspace_distance: need 1 <= k <= d1 <= d2");
  if (v1.rows() != v2.rows()) throw InputError("subspace_distance: row dimension mismatch");
  auto check_orth = [](const Mat& v, const char* name) {
    Mat g = v.transpose() * v;
    if ((g - Mat::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff() > 1e-8)
      throw InputError(std::string("subspace_distance: ") + name + " columns not orthonormal");
  };
  check_orth(v1, "v1");
  check_orth(v2, "v2");
  Eigen::JacobiSVD<Mat> svd(v1.transpose() * v2);
  const Vec& s = svd.singularValues();
  double acc = 0.0;
  for (Index i = 0; i < k; ++i) {
    const double si = std::min(1.0, i < s.size() ? s(i) : 0.0);
    acc += 1.0 - si * si;
  }
  return std::sqrt(acc / static_cast<double>(k));
}

Mat load_dense_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("load_dense_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError("load_dense_csv: empty file " + path);
  // header row: ncols fields
  const Index ncols = static_cast<Index>(std::count(line.begin(), line.end(), ',')) + 1;
  std::vector<double> values;
  Index nrows = 0;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    Index c = 0;
    while (std::getline(ss, field, ',')) {
      double v;
      if (!parse_double(field, v))
        throw InputError("load_dense_csv: malformed value on line " + std::to_string(lineno));
      values.push_back(v);
      ++c;
    }
    if (c != ncols)
      throw InputError("load_dense_csv: line " + std::to_string(lineno) + " has " +
                       std::to_string(c) + " fields, expected " + std::to_string(ncols));
    ++nrows;
  }
  Mat a(nrows, ncols);
  for (Index i = 0; i < nrows; ++i)
    for (Index j = 0; j < ncols; ++j) a(i, j) = values[i * ncols + j];
  return a;
}

void save_dense_csv(const std::string& path, const Mat& a) {
  std::ofstream out(path);
  if (!out) throw InputError("save_dense_csv: cannot write " + path);
  out.precision(17);
  for (Index j = 0; j < a.cols(); ++j) out << (j ? "," : "") << "c" << (j + 1);
  out << "\n";
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) out << (j ? "," : "") << a(i, j);
    out << "\n";
  }
}

}  // namespace sfmc
