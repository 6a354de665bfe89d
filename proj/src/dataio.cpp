#include "hyre/dataio.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

namespace hyre {

namespace {

using nlohmann::json;

constexpr std::uint64_t kModelMagic = 0x3157545445525948ull;  // "HYRETTW1"
constexpr std::uint32_t kModelVersion = 1;

[[noreturn]] void fail_at(const std::string& path, std::size_t line,
                          const std::string& what) {
  throw ValidationError(path + ":" + std::to_string(line) + ": " + what);
}

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void for_each_jsonl(const std::string& path,
                    const std::function<void(std::size_t, const json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail_at(path, line_no, e.what());
    }
    fn(line_no, j);
  }
}

std::uint32_t to_attr_id(const json& v, const std::string& path,
                         std::size_t line) {
  if (!v.is_number_unsigned())
    fail_at(path, line, "attribute ids must be unsigned integers");
  const auto raw = v.get<std::uint64_t>();
  if (raw > 0xffffffffull) fail_at(path, line, "attribute id out of range");
  return static_cast<std::uint32_t>(raw);
}

links::AttrMap to_attr_map(const json& j, const char* field,
                           const std::string& path, std::size_t line) {
  if (!j.is_object())
    fail_at(path, line, std::string(field) + " must be an object");
  links::AttrMap out;
  for (const auto& [name, values] : j.items()) {
    if (!values.is_array())
      fail_at(path, line,
              std::string(field) + "." + name + " must be an array");
    auto& list = out[name];
    for (const auto& v : values) {
      if (!v.is_string())
        fail_at(path, line,
                std::string(field) + "." + name + " values must be strings");
      list.push_back(v.get<std::string>());
    }
  }
  return out;
}

// Content-derived side id so identical attribute maps on different lines
// collapse to one entity.
std::string side_id(const char* prefix, const links::AttrMap& attrs) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& [name, values] : attrs) {
    h = fnv1a64(name.data(), name.size() + 1, h);
    for (const auto& v : values) h = fnv1a64(v.data(), v.size() + 1, h);
  }
  std::ostringstream os;
  os << prefix << std::hex << h;
  return os.str();
}

std::vector<std::string> to_token_list(const json& j, const char* field,
                                       const std::string& path,
                                       std::size_t line) {
  if (!j.is_array() || j.empty())
    fail_at(path, line, std::string(field) + " must be a non-empty array");
  std::vector<std::string> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_string())
      fail_at(path, line, std::string(field) + " entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

void write_matrix(ChecksumWriter& w, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.write_pod<double>(m(r, c));
}

Eigen::MatrixXd read_matrix(ChecksumReader& r, Eigen::Index rows,
                            Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r.read_pod<double>();
  return m;
}

}  // namespace

IngestSchema read_schema_json(const std::string& path) {
  const json j = parse_file(path);
  if (!j.is_object() || !j.contains("clauses") || !j.contains("dim"))
    throw ValidationError(path + ": schema needs 'clauses' and 'dim'");
  IngestSchema schema;
  for (const auto& name : j.at("clauses")) {
    if (!name.is_string())
      throw ValidationError(path + ": clause names must be strings");
    schema.clause_names.push_back(name.get<std::string>());
  }
  if (schema.clause_names.empty())
    throw ValidationError(path + ": 'clauses' must not be empty");
  if (!j.at("dim").is_number_unsigned())
    throw ValidationError(path + ": dim must be an unsigned integer");
  schema.dim = j.at("dim").get<std::uint32_t>();
  return schema;
}

std::vector<DocumentInput> read_documents_jsonl(const std::string& path,
                                                const IngestSchema& schema) {
  std::map<std::string, std::uint32_t> slot_of;
  for (std::uint32_t i = 0; i < schema.clause_names.size(); ++i)
    slot_of[schema.clause_names[i]] = i;

  std::vector<DocumentInput> docs;
  for_each_jsonl(path, [&](std::size_t line, const json& j) {
    DocumentInput doc;
    if (!j.is_object() || !j.contains("id") || !j.at("id").is_string())
      fail_at(path, line, "document needs a string 'id'");
    doc.doc_id = j.at("id").get<std::string>();
    doc.clauses.resize(schema.clause_names.size());
    if (j.contains("clauses")) {
      if (!j.at("clauses").is_object())
        fail_at(path, line, "'clauses' must be an object");
      for (const auto& [name, ids] : j.at("clauses").items()) {
        auto it = slot_of.find(name);
        if (it == slot_of.end())
          fail_at(path, line, "unknown clause '" + name + "'");
        if (!ids.is_array())
          fail_at(path, line, "clause '" + name + "' must be an array");
        for (const auto& v : ids)
          doc.clauses[it->second].push_back(to_attr_id(v, path, line));
      }
    }
    if (j.contains("embedding")) {
      const auto& emb = j.at("embedding");
      if (!emb.is_array())
        fail_at(path, line, "'embedding' must be an array");
      if (emb.size() != schema.dim)
        fail_at(path, line,
                "embedding: expected dim " + std::to_string(schema.dim) +
                    ", got " + std::to_string(emb.size()));
      for (const auto& v : emb) {
        if (!v.is_number())
          fail_at(path, line, "embedding entries must be numbers");
        doc.embedding.push_back(static_cast<float>(v.get<double>()));
      }
    } else {
      doc.embedding.assign(schema.dim, 0.0f);
    }
    docs.push_back(std::move(doc));
  });
  return docs;
}

std::vector<LabeledPair> read_labeled_pairs_jsonl(const std::string& path) {
  std::vector<LabeledPair> pairs;
  for_each_jsonl(path, [&](std::size_t line, const json& j) {
    if (!j.is_object() || !j.contains("seeker") || !j.contains("job") ||
        !j.contains("label"))
      fail_at(path, line, "pair needs 'seeker', 'job', 'label'");
    LabeledPair lp;
    lp.pair.seeker = to_attr_map(j.at("seeker"), "seeker", path, line);
    lp.pair.job = to_attr_map(j.at("job"), "job", path, line);
    if (!j.at("label").is_number_integer())
      fail_at(path, line, "'label' must be 0 or 1");
    lp.pair.label = j.at("label").get<int>();
    if (lp.pair.label != 0 && lp.pair.label != 1)
      fail_at(path, line, "'label' must be 0 or 1");
    lp.seeker_id = j.contains("seeker_id")
                       ? j.at("seeker_id").get<std::string>()
                       : side_id("s-", lp.pair.seeker);
    lp.job_id = j.contains("job_id") ? j.at("job_id").get<std::string>()
                                     : side_id("j-", lp.pair.job);
    pairs.push_back(std::move(lp));
  });
  return pairs;
}

std::vector<links::LinkTemplate> read_templates_json(const std::string& path) {
  const json j = parse_file(path);
  if (!j.is_array()) throw ValidationError(path + ": expected an array");
  std::vector<links::LinkTemplate> out;
  for (const auto& t : j) {
    if (!t.is_object() || !t.contains("seeker") || !t.contains("job"))
      throw ValidationError(path + ": template needs 'seeker' and 'job'");
    out.push_back({t.at("seeker").get<std::string>(),
                   t.at("job").get<std::string>()});
  }
  return out;
}

std::vector<tt::PairExample> read_pair_examples_jsonl(
    const std::string& path) {
  std::vector<tt::PairExample> out;
  for_each_jsonl(path, [&](std::size_t line, const json& j) {
    if (!j.is_object() || !j.contains("seeker_tokens") ||
        !j.contains("job_tokens"))
      fail_at(path, line, "example needs 'seeker_tokens' and 'job_tokens'");
    out.push_back(
        {to_token_list(j.at("seeker_tokens"), "seeker_tokens", path, line),
         to_token_list(j.at("job_tokens"), "job_tokens", path, line)});
  });
  return out;
}

void write_metrics_jsonl(const std::string& path,
                         const std::vector<tt::MetricsRecord>& history) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for write: " + path);
  for (const auto& rec : history) {
    json j{{"stage", rec.stage},
           {"step", rec.step},
           {"loss", rec.loss},
           {"inBatchRecall", rec.in_batch_recall}};
    out << j.dump() << "\n";
  }
}

void write_links_export(const std::string& path,
                        const links::ServingGraph& graph,
                        const links::IndexExport& exported) {
  json nodes = json::array();
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    json seeker = json::array(), job = json::array();
    for (const auto& [a, v] : graph.nodes[i].seeker_segment)
      seeker.push_back({a, v});
    for (const auto& [a, v] : graph.nodes[i].job_segment)
      job.push_back({a, v});
    nodes.push_back({{"id", i + 1},
                     {"seeker", seeker},
                     {"job", job},
                     {"jobs", graph.node_jobs[i]}});
  }
  json j{{"nodes", nodes},
         {"seekerAttributes", exported.seeker_attributes},
         {"jobAttributes", exported.job_attributes}};
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for write: " + path);
  out << j.dump(2) << "\n";
}

void save_model(const std::string& path, const tt::TowerModel& model) {
  ChecksumWriter w(path);
  w.write_pod<std::uint64_t>(kModelMagic);
  w.write_pod<std::uint32_t>(kModelVersion);
  w.write_pod<std::uint32_t>(model.config.hash_buckets);
  w.write_pod<std::uint32_t>(model.config.embed_dim);
  w.write_pod<std::uint32_t>(model.config.out_dim);
  w.write_pod<std::uint64_t>(model.config.seed);
  for (const auto* tower : {&model.seeker, &model.job}) {
    write_matrix(w, tower->embed);
    write_matrix(w, tower->w);
    write_matrix(w, tower->b);
  }
  w.finish();
}

tt::TowerModel load_model(const std::string& path) {
  ChecksumReader r(path);
  if (r.read_pod<std::uint64_t>() != kModelMagic)
    throw LoadError(LoadError::Cause::kBadMagic, "not a model file: " + path);
  if (const auto v = r.read_pod<std::uint32_t>(); v != kModelVersion)
    throw LoadError(LoadError::Cause::kVersionMismatch,
                    "model version " + std::to_string(v) + ", expected " +
                        std::to_string(kModelVersion));
  tt::TowerModel model;
  model.config.hash_buckets = r.read_pod<std::uint32_t>();
  model.config.embed_dim = r.read_pod<std::uint32_t>();
  model.config.out_dim = r.read_pod<std::uint32_t>();
  model.config.seed = r.read_pod<std::uint64_t>();
  if (model.config.hash_buckets == 0 || model.config.embed_dim == 0 ||
      model.config.out_dim == 0)
    throw LoadError(LoadError::Cause::kChecksum,
                    "model header has zero dimensions");
  for (auto* tower : {&model.seeker, &model.job}) {
    tower->embed = read_matrix(r, model.config.hash_buckets,
                               model.config.embed_dim);
    tower->w = read_matrix(r, model.config.out_dim, model.config.embed_dim);
    tower->b = read_matrix(r, model.config.out_dim, 1);
  }
  r.verify();
  return model;
}

}  // namespace hyre
