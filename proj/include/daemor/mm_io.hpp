// Copyright (c) the daemor authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DAEMOR_MM_IO_HPP
#define DAEMOR_MM_IO_HPP

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "daemor/core.hpp"
#include "daemor/errors.hpp"

namespace daemor {

// Matrix Market I/O. Sparse matrices use the coordinate format (real,
// general or symmetric); dense matrices use the array format (real general,
// column-major). Values are written with 17 significant digits so that
// round-trips are bit-faithful for doubles.

namespace mm_detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

struct Header {
  bool coordinate = true;
  bool symmetric = false;
};

inline Header read_header(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line))
    throw SerializationError("matrix market: empty file " + path);
  std::istringstream hs(line);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (lower(banner) != "%%matrixmarket" || lower(object) != "matrix")
    throw SerializationError("matrix market: bad banner in " + path);
  Header h;
  const std::string fmt = lower(format);
  if (fmt == "coordinate")
    h.coordinate = true;
  else if (fmt == "array")
    h.coordinate = false;
  else
    throw SerializationError("matrix market: unsupported format in " + path);
  if (lower(field) != "real" && lower(field) != "integer")
    throw SerializationError("matrix market: only real files supported: " + path);
  const std::string sym = lower(symmetry);
  if (sym == "general")
    h.symmetric = false;
  else if (sym == "symmetric")
    h.symmetric = true;
  else
    throw SerializationError("matrix market: unsupported symmetry in " + path);
  return h;
}

inline void skip_comments(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '%') continue;
    return;
  }
  line.clear();
}

}  // namespace mm_detail

inline void write_matrix_market(const std::filesystem::path& path,
                                const SpMat& M) {
  std::ofstream out(path);
  if (!out)
    throw SerializationError("matrix market: cannot open " + path.string());
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << M.rows() << " " << M.cols() << " " << M.nonZeros() << "\n";
  out.precision(17);
  for (int k = 0; k < M.outerSize(); ++k)
    for (SpMat::InnerIterator it(M, k); it; ++it)
      out << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
  if (!out)
    throw SerializationError("matrix market: write failed for " + path.string());
}

inline void write_matrix_market(const std::filesystem::path& path,
                                const Mat& M) {
  std::ofstream out(path);
  if (!out)
    throw SerializationError("matrix market: cannot open " + path.string());
  out << "%%MatrixMarket matrix array real general\n";
  out << M.rows() << " " << M.cols() << "\n";
  out.precision(17);
  for (Eigen::Index j = 0; j < M.cols(); ++j)
    for (Eigen::Index i = 0; i < M.rows(); ++i) out << M(i, j) << "\n";
  if (!out)
    throw SerializationError("matrix market: write failed for " + path.string());
}

inline SpMat read_matrix_market_sparse(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw SerializationError("matrix market: cannot open " + path.string());
  const auto h = mm_detail::read_header(in, path.string());
  std::string line;
  mm_detail::skip_comments(in, line);
  std::istringstream ds(line);
  if (h.coordinate) {
    long rows = 0, cols = 0, nnz = 0;
    ds >> rows >> cols >> nnz;
    if (rows < 0 || cols < 0 || nnz < 0)
      throw SerializationError("matrix market: bad sizes in " + path.string());
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(h.symmetric ? 2 * nnz : nnz));
    for (long k = 0; k < nnz; ++k) {
      long i = 0, j = 0;
      double v = 0.0;
      if (!(in >> i >> j >> v))
        throw SerializationError("matrix market: truncated " + path.string());
      trip.emplace_back(i - 1, j - 1, v);
      if (h.symmetric && i != j) trip.emplace_back(j - 1, i - 1, v);
    }
    SpMat M(rows, cols);
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
  }
  // Dense array file requested as sparse: accept and convert.
  long rows = 0, cols = 0;
  ds >> rows >> cols;
  Mat D(rows, cols);
  for (long j = 0; j < cols; ++j)
    for (long i = 0; i < rows; ++i)
      if (!(in >> D(i, j)))
        throw SerializationError("matrix market: truncated " + path.string());
  return D.sparseView();
}

inline Mat read_matrix_market_dense(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw SerializationError("matrix market: cannot open " + path.string());
  const auto h = mm_detail::read_header(in, path.string());
  std::string line;
  mm_detail::skip_comments(in, line);
  std::istringstream ds(line);
  if (!h.coordinate) {
    long rows = 0, cols = 0;
    ds >> rows >> cols;
    if (rows < 0 || cols < 0)
      throw SerializationError("matrix market: bad sizes in " + path.string());
    Mat D(rows, cols);
    for (long j = 0; j < cols; ++j)
      for (long i = 0; i < rows; ++i)
        if (!(in >> D(i, j)))
          throw SerializationError("matrix market: truncated " + path.string());
    return D;
  }
  long rows = 0, cols = 0, nnz = 0;
  ds >> rows >> cols >> nnz;
  Mat D = Mat::Zero(rows, cols);
  for (long k = 0; k < nnz; ++k) {
    long i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v))
      throw SerializationError("matrix market: truncated " + path.string());
    D(i - 1, j - 1) = v;
    if (h.symmetric && i != j) D(j - 1, i - 1) = v;
  }
  return D;
}

}  // namespace daemor

#endif  // DAEMOR_MM_IO_HPP
