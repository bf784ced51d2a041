#include "cbdsel/concept_space.hpp"

#include <charconv>
#include <unordered_set>

#include "cbdsel/detail/binary_io.hpp"
#include "cbdsel/embstore.hpp"

namespace cbdsel {

std::vector<ScoredConcept> top_scored(const Vector<double>& scores, std::size_t m) {
  const auto k = static_cast<std::size_t>(scores.size());
  const std::size_t take = std::min(m, k);
  std::vector<std::uint32_t> order(k);
  std::iota(order.begin(), order.end(), 0u);
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
  std::vector<ScoredConcept> top;
  top.reserve(take);
  for (std::size_t i = 0; i < take; ++i) top.push_back({order[i], scores[order[i]]});
  return top;
}

Rcs build_rcs(const EmbeddingMatrix& train_shared, const ConceptSpace& knb, std::size_t m, unsigned threads) {
  if (train_shared.rows() < 1) throw ConfigError("build_rcs: need at least one training embedding");
  if (knb.size() == 0) throw ConfigError("build_rcs: knowledge base is empty");
  if (static_cast<Eigen::Index>(knb.size()) != knb.embeddings.rows())
    throw ShapeError("build_rcs: knowledge base names and embeddings disagree in size");
  if (m == 0) throw ConfigError("build_rcs: m must be >= 1");

  // First occurrence of each name wins.
  std::vector<std::uint32_t> unique_rows;
  {
    std::unordered_set<std::string> seen;
    for (std::size_t j = 0; j < knb.size(); ++j)
      if (seen.insert(knb.names[j]).second) unique_rows.push_back(static_cast<std::uint32_t>(j));
  }
  EmbeddingMatrix unique_emb(static_cast<Eigen::Index>(unique_rows.size()), knb.embeddings.cols());
  for (std::size_t u = 0; u < unique_rows.size(); ++u)
    unique_emb.row(static_cast<Eigen::Index>(u)) = knb.embeddings.row(unique_rows[u]);

  const CosineIndex index(unique_emb);
  const auto assignments = assign_concepts(train_shared, index, m, threads);

  std::vector<char> used(unique_rows.size(), 0);
  for (const auto& a : assignments)
    for (const auto& c : a.concepts) used[c.concept_index] = 1;

  Rcs rcs;
  rcs.m = m;
  rcs.source_size = static_cast<std::size_t>(train_shared.rows());
  rcs.knb_size = knb.size();
  for (std::size_t u = 0; u < unique_rows.size(); ++u)
    if (used[u]) rcs.knb_indices.push_back(unique_rows[u]);

  rcs.space.embeddings.resize(static_cast<Eigen::Index>(rcs.knb_indices.size()), knb.embeddings.cols());
  for (std::size_t i = 0; i < rcs.knb_indices.size(); ++i) {
    rcs.space.names.push_back(knb.names[rcs.knb_indices[i]]);
    rcs.space.embeddings.row(static_cast<Eigen::Index>(i)) = knb.embeddings.row(rcs.knb_indices[i]);
  }
  return rcs;
}

namespace {

const char* const kNamesFile = "concepts.txt";
const char* const kEmbFile = "concepts.ebin";
const char* const kMetaFile = "rcs.meta";

std::size_t parse_count(const std::string& key, const std::string& value, const std::filesystem::path& path) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw InvariantError(path.string() + ": value of '" + key + "' is not a count: " + value);
  return out;
}

}  // namespace

void save_rcs(const Rcs& rcs, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  save_concepts(rcs.space, dir / kNamesFile, dir / kEmbFile);
  std::string meta = "m=" + std::to_string(rcs.m) + "\n" + "source_size=" + std::to_string(rcs.source_size) +
                     "\n" + "knb_size=" + std::to_string(rcs.knb_size) + "\n" + "knb_indices=";
  for (std::size_t i = 0; i < rcs.knb_indices.size(); ++i) {
    if (i) meta += ',';
    meta += std::to_string(rcs.knb_indices[i]);
  }
  meta += "\n";
  detail::write_text_file(dir / kMetaFile, meta);
}

Rcs load_rcs(const std::filesystem::path& dir) {
  Rcs rcs;
  rcs.space = load_concepts(dir / kNamesFile, dir / kEmbFile);
  const auto meta_path = dir / kMetaFile;
  for (const auto& line : parse_concept_names(detail::read_text_file(meta_path))) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvariantError(meta_path.string() + ": expected key=value, got: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "m") {
      rcs.m = parse_count(key, value, meta_path);
    } else if (key == "source_size") {
      rcs.source_size = parse_count(key, value, meta_path);
    } else if (key == "knb_size") {
      rcs.knb_size = parse_count(key, value, meta_path);
    } else if (key == "knb_indices") {
      std::size_t start = 0;
      while (start < value.size()) {
        std::size_t end = value.find(',', start);
        if (end == std::string::npos) end = value.size();
        rcs.knb_indices.push_back(
            static_cast<std::uint32_t>(parse_count(key, value.substr(start, end - start), meta_path)));
        start = end + 1;
      }
    }
  }
  if (!rcs.knb_indices.empty() && rcs.knb_indices.size() != rcs.size())
    throw ShapeError(meta_path.string() + ": knb_indices length does not match the concept count");
  return rcs;
}

}  // namespace cbdsel
