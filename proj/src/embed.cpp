#include "regconv/embed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

namespace regconv {

std::size_t Vocabulary::find(const std::string& term) const {
  auto it = std::lower_bound(terms.begin(), terms.end(), term);
  if (it == terms.end() || *it != term) return npos;
  return static_cast<std::size_t>(it - terms.begin());
}

std::size_t EmbeddingMatrix::index_of(const std::string& id) const {
  auto it = std::find(provision_ids.begin(), provision_ids.end(), id);
  if (it == provision_ids.end()) throw DataError(fmt::format("no embedding for provision '{}'", id));
  return static_cast<std::size_t>(it - provision_ids.begin());
}

void EmbeddingMatrix::check_unit_rows(double tol) const {
  if (rows.rows() != provision_ids.size())
    throw DataError("embedding row count does not match id count");
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    double n = l2_norm(rows.row(i));
    if (!(std::abs(n - 1.0) <= tol))
      throw NumericError(fmt::format("embedding row '{}' has norm {} (expected 1)", provision_ids[i], n));
  }
}

Vocabulary build_vocabulary(const std::vector<ProcessedProvision>& processed, std::size_t min_df) {
  if (min_df < 1) throw ConfigError("min_df must be at least 1");
  std::map<std::string, std::size_t> df;
  bool any = false;
  for (const auto& p : processed) {
    std::set<std::string> seen;
    for (const auto& t : p.tokens) seen.insert(t.lemma);
    any = any || !seen.empty();
    for (const auto& term : seen) ++df[term];
  }
  if (!any) throw DataError("cannot build a vocabulary: every provision is empty after preprocessing");
  Vocabulary v;
  v.document_count = processed.size();
  for (const auto& [term, count] : df) {
    if (count < min_df) continue;
    v.terms.push_back(term);
    v.document_frequency.push_back(count);
  }
  if (v.terms.empty())
    throw DataError(fmt::format("no term reaches min_df={} in {} provisions", min_df, processed.size()));
  return v;
}

EmbeddingMatrix tfidf_embed(const std::vector<ProcessedProvision>& processed,
                            const Vocabulary& vocab, std::optional<long> target_dim,
                            std::uint64_t seed) {
  if (target_dim && *target_dim <= 0)
    throw ConfigError(fmt::format("embedding dimension must be positive (got {})", *target_dim));
  if (vocab.terms.empty()) throw DataError("empty vocabulary");

  const std::size_t vsize = vocab.terms.size();
  const double n_docs = static_cast<double>(vocab.document_count);
  std::vector<double> idf(vsize);
  for (std::size_t t = 0; t < vsize; ++t)
    idf[t] = std::log((1.0 + n_docs) / (1.0 + static_cast<double>(vocab.document_frequency[t]))) + 1.0;

  const bool project = target_dim && static_cast<std::size_t>(*target_dim) < vsize;
  const std::size_t dim = project ? static_cast<std::size_t>(*target_dim) : vsize;

  Matrix projection;
  if (project) {
    projection = Matrix(vsize, dim);
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& x : projection.data()) x = rng.gaussian() * scale;
  }

  EmbeddingMatrix out;
  out.backend_tag = "tfidf";
  out.rows = Matrix(processed.size(), dim);
  out.provision_ids.reserve(processed.size());
  for (const auto& p : processed) out.provision_ids.push_back(p.provision_id);

  std::vector<char> flagged(processed.size(), 0);
  parallel_for(processed.size(), [&](std::size_t i) {
    std::map<std::size_t, double> counts;  // ordered by term index
    for (const auto& tok : processed[i].tokens) {
      std::size_t t = vocab.find(tok.lemma);
      if (t != Vocabulary::npos) counts[t] += 1.0;
    }
    auto row = out.rows.row(i);
    for (const auto& [t, tf] : counts) {
      const double w = tf * idf[t];
      if (project) {
        auto r = projection.row(t);
        for (std::size_t k = 0; k < dim; ++k) row[k] += w * r[k];
      } else {
        row[t] = w;
      }
    }
    if (!normalize_in_place(row)) {
      std::fill(row.begin(), row.end(), 0.0);
      row[0] = 1.0;
      flagged[i] = 1;
    }
  });
  for (std::size_t i = 0; i < processed.size(); ++i)
    if (flagged[i]) out.flagged_ids.push_back(out.provision_ids[i]);

  std::set<std::string> unique(out.provision_ids.begin(), out.provision_ids.end());
  if (unique.size() != out.provision_ids.size()) throw DataError("duplicate provision ids in embedding input");
  return out;
}

namespace {

constexpr std::string_view kMagic = "EMB1\n";

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out += static_cast<char>((v >> (8 * k)) & 0xFF);
}

std::uint32_t get_u32(std::string_view in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= std::uint32_t(static_cast<unsigned char>(in[pos + k])) << (8 * k);
  return v;
}

}  // namespace

std::string encode_emb1(const std::vector<std::string>& ids, const Matrix& rows) {
  if (ids.size() != rows.rows()) throw DataError("EMB1: id count does not match row count");
  std::string out(kMagic);
  out += fmt::format("n={} d={}\n", rows.rows(), rows.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    put_u32(out, static_cast<std::uint32_t>(ids[i].size()));
    out += ids[i];
    for (double x : rows.row(i)) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  return out;
}

void write_emb1(const std::string& path, const std::vector<std::string>& ids, const Matrix& rows) {
  write_file(path, encode_emb1(ids, rows));
}

Emb1Contents decode_emb1(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw DataError("EMB1: bad magic");
  std::size_t pos = kMagic.size();
  std::size_t eol = bytes.find('\n', pos);
  if (eol == std::string_view::npos) throw DataError("EMB1: missing header line");
  std::string header(bytes.substr(pos, eol - pos));
  unsigned long long n = 0, d = 0;
  char tail = 0;
  if (std::sscanf(header.c_str(), "n=%llu d=%llu%c", &n, &d, &tail) != 2 ||
      header != fmt::format("n={} d={}", n, d))
    throw DataError(fmt::format("EMB1: malformed header '{}'", header));
  if (d == 0) throw DataError("EMB1: dimension must be positive");
  pos = eol + 1;
  if (n > 0 && (bytes.size() - pos) / n < 4 + 4 * d)
    throw DataError(fmt::format("EMB1: truncated file: {} bytes cannot hold n={} d={}", bytes.size() - pos, n, d));

  Emb1Contents out;
  out.rows = Matrix(n, d);
  out.ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (bytes.size() - pos < 4) throw DataError(fmt::format("EMB1: truncated file at record {}", i));
    const std::uint32_t len = get_u32(bytes, pos);
    pos += 4;
    if (bytes.size() - pos < len) throw DataError(fmt::format("EMB1: truncated id at record {}", i));
    out.ids.emplace_back(bytes.substr(pos, len));
    pos += len;
    if ((bytes.size() - pos) / 4 < d)
      throw DataError(fmt::format("EMB1: truncated file: record {} ('{}') has fewer than d={} floats", i,
                                  out.ids.back(), d));
    for (std::size_t k = 0; k < d; ++k) {
      float f = std::bit_cast<float>(get_u32(bytes, pos));
      pos += 4;
      if (!std::isfinite(f))
        throw DataError(fmt::format("EMB1: non-finite value in record '{}'", out.ids.back()));
      out.rows(i, k) = f;
    }
  }
  if (pos != bytes.size())
    throw DataError(fmt::format("EMB1: {} trailing bytes after {} records", bytes.size() - pos, n));
  return out;
}

EmbeddingMatrix load_external_embeddings(const std::string& path,
                                         const std::vector<std::string>& expected_ids) {
  Emb1Contents raw = decode_emb1(read_file(path));
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < raw.ids.size(); ++i)
    if (!where.emplace(raw.ids[i], i).second)
      throw DataError(fmt::format("{}: duplicate id '{}'", path, raw.ids[i]));

  std::set<std::string> expected(expected_ids.begin(), expected_ids.end());
  for (const auto& id : expected_ids)
    if (!where.contains(id)) throw DataError(fmt::format("{}: missing embedding for id '{}'", path, id));
  for (const auto& id : raw.ids)
    if (!expected.contains(id)) throw DataError(fmt::format("{}: unexpected extra id '{}'", path, id));

  EmbeddingMatrix out;
  out.backend_tag = "external";
  out.provision_ids = expected_ids;
  out.rows = Matrix(expected_ids.size(), raw.rows.cols());
  for (std::size_t i = 0; i < expected_ids.size(); ++i) {
    auto src = raw.rows.row(where.at(expected_ids[i]));
    auto dst = out.rows.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    if (!normalize_in_place(dst)) {
      // Exporters write zero vectors for empty text; treat them like empty TF-IDF rows.
      dst[0] = 1.0;
      out.flagged_ids.push_back(expected_ids[i]);
    }
  }
  return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw DataError(fmt::format("cosine similarity: dimension mismatch ({} vs {})", u.size(), v.size()));
  const double nu = l2_norm(u), nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) throw NumericError("cosine similarity of a zero vector is undefined");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

}  // namespace regconv
