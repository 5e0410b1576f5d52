#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regconv/common.hpp"
#include "regconv/preprocess.hpp"

namespace regconv {

struct Vocabulary {
  std::vector<std::string> terms;  // sorted, unique
  std::vector<std::size_t> document_frequency;
  std::size_t document_count = 0;  // documents the frequencies were counted over

  /// Index of `term`, or npos.
  std::size_t find(const std::string& term) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// n x dim matrix of unit-norm provision vectors keyed by id.
struct EmbeddingMatrix {
  std::vector<std::string> provision_ids;
  Matrix rows;
  std::string backend_tag;             // "tfidf" | "external"
  std::vector<std::string> flagged_ids;  // empty provisions mapped to the sentinel basis vector

  std::size_t size() const { return provision_ids.size(); }
  std::size_t dim() const { return rows.cols(); }
  /// Row index of `id`; throws DataError when absent.
  std::size_t index_of(const std::string& id) const;
  /// Throws NumericError unless every row has unit norm within `tol`.
  void check_unit_rows(double tol = 1e-9) const;
};

/// Terms whose document frequency is at least `min_df`.
Vocabulary build_vocabulary(const std::vector<ProcessedProvision>& processed, std::size_t min_df);

/// weight(t, d) = count(t, d) * (ln((1 + N) / (1 + df(t))) + 1), optionally
/// followed by a seeded Gaussian random projection to `target_dim`, then
/// L2-normalized. Empty rows become e_0 and are flagged.
EmbeddingMatrix tfidf_embed(const std::vector<ProcessedProvision>& processed,
                            const Vocabulary& vocab, std::optional<long> target_dim,
                            std::uint64_t seed);

/// Encodes the matrix as EMB1 (rows written as little-endian float32).
std::string encode_emb1(const std::vector<std::string>& ids, const Matrix& rows);
void write_emb1(const std::string& path, const std::vector<std::string>& ids, const Matrix& rows);

struct Emb1Contents {
  std::vector<std::string> ids;
  Matrix rows;
};
/// Parses EMB1 bytes without reordering or normalizing.
Emb1Contents decode_emb1(std::string_view bytes);

/// Loads an EMB1 file, reorders rows to `expected_ids` and re-normalizes them.
/// Zero rows become the first basis vector and are flagged.
EmbeddingMatrix load_external_embeddings(const std::string& path,
                                         const std::vector<std::string>& expected_ids);

/// u.v / (|u| |v|), clamped to [-1, 1].
double cosine_similarity(std::span<const double> u, std::span<const double> v);

}  // namespace regconv
