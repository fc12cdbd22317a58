#include "nmln/io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "nmln/errors.hpp"

namespace nmln {

namespace {

using json = nlohmann::json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_comment(const std::string& line) {
  const auto hash = line.find('#');
  return trim(hash == std::string::npos ? line : line.substr(0, hash));
}

bool valid_symbol(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == '(' || c == ')' || c == ',' || c == '#' || c == ' ' || c == '\t' || c == '/' ||
        c == ':') {
      return false;
    }
  }
  return true;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
  return in;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

}  // namespace

SignatureSpec parse_signature(std::istream& in) {
  SignatureSpec spec;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_comment(raw);
    if (line.empty()) continue;
    if (line.rfind("constants:", 0) == 0) {
      if (spec.constants) throw ParseError("duplicate constants line", line_no);
      auto names = split_list(std::string_view(line).substr(10));
      for (const auto& n : names) {
        if (!valid_symbol(n)) throw ParseError("invalid constant name '" + n + "'", line_no);
      }
      spec.constants = std::move(names);
      continue;
    }
    const auto slash = line.find('/');
    if (slash == std::string::npos) throw ParseError("expected name/arity, got '" + line + "'", line_no);
    Predicate p;
    p.name = trim(std::string_view(line).substr(0, slash));
    const std::string arity = trim(std::string_view(line).substr(slash + 1));
    const auto [ptr, ec] = std::from_chars(arity.data(), arity.data() + arity.size(), p.arity);
    if (ec != std::errc{} || ptr != arity.data() + arity.size() || !valid_symbol(p.name)) {
      throw ParseError("expected name/arity, got '" + line + "'", line_no);
    }
    if (p.arity < 1 || p.arity > kMaxArity) {
      throw ParseError("arity of '" + p.name + "' must be 1 or 2", line_no);
    }
    spec.predicates.push_back(std::move(p));
  }
  return spec;
}

SignatureSpec read_signature_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_signature(in);
}

std::vector<AtomRecord> parse_atoms(std::istream& in) {
  std::vector<AtomRecord> records;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_comment(raw);
    if (line.empty()) continue;
    const auto open = line.find('(');
    const auto close = line.find(')');
    if (open == std::string::npos || close == std::string::npos || close < open) {
      throw ParseError("expected pred(args), got '" + line + "'", line_no);
    }
    AtomRecord r;
    r.line = line_no;
    r.predicate = trim(std::string_view(line).substr(0, open));
    if (!valid_symbol(r.predicate)) throw ParseError("invalid predicate in '" + line + "'", line_no);
    std::string args = line.substr(open + 1, close - open - 1);
    std::stringstream parts(args);
    std::string arg;
    while (std::getline(parts, arg, ',')) {
      arg = trim(arg);
      if (!valid_symbol(arg)) throw ParseError("invalid argument in '" + line + "'", line_no);
      r.args.push_back(std::move(arg));
    }
    if (r.args.empty() || r.args.size() > kMaxArity) {
      throw ParseError("atoms take one or two arguments: '" + line + "'", line_no);
    }
    const std::string rest = trim(std::string_view(line).substr(close + 1));
    if (rest == "1") {
      r.label = true;
    } else if (rest == "0") {
      r.label = false;
    } else if (!rest.empty()) {
      throw ParseError("unexpected trailing text '" + rest + "'", line_no);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<AtomRecord> read_atom_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_atoms(in);
}

SignaturePtr resolve_signature(const SignatureSpec& spec,
                               const std::vector<std::vector<AtomRecord>>& record_sets,
                               const LoadOptions& options) {
  std::vector<Predicate> predicates = spec.predicates;
  std::unordered_map<std::string, int> arity;
  for (const auto& p : predicates) arity.emplace(p.name, p.arity);

  const bool collect_constants = !spec.constants.has_value();
  std::vector<std::string> constants = spec.constants.value_or(std::vector<std::string>{});
  std::unordered_map<std::string, int> known;
  for (std::size_t i = 0; i < constants.size(); ++i) known.emplace(constants[i], static_cast<int>(i));

  for (const auto& records : record_sets) {
    for (const auto& r : records) {
      const auto it = arity.find(r.predicate);
      const int a = static_cast<int>(r.args.size());
      if (it == arity.end()) {
        if (!options.auto_extend) throw ParseError("unknown predicate '" + r.predicate + "'", r.line);
        arity.emplace(r.predicate, a);
        predicates.push_back(Predicate{r.predicate, a});
      } else if (it->second != a) {
        throw ParseError("predicate '" + r.predicate + "' has arity " + std::to_string(it->second) +
                             ", got " + std::to_string(a) + " arguments",
                         r.line);
      }
      for (const auto& c : r.args) {
        if (known.contains(c)) continue;
        if (!collect_constants && !options.auto_extend) {
          throw ParseError("unknown constant '" + c + "'", r.line);
        }
        known.emplace(c, static_cast<int>(constants.size()));
        constants.push_back(c);
      }
    }
  }
  return std::make_shared<const Signature>(std::move(constants), std::move(predicates));
}

GroundAtom to_atom(const AtomRecord& record, const Signature& signature) {
  const auto p = signature.find_predicate(record.predicate);
  if (!p) throw ParseError("unknown predicate '" + record.predicate + "'", record.line);
  GroundAtom atom;
  atom.predicate = *p;
  atom.arity = static_cast<int>(record.args.size());
  if (signature.predicate(*p).arity != atom.arity) {
    throw ParseError("arity mismatch for '" + record.predicate + "'", record.line);
  }
  for (int i = 0; i < atom.arity; ++i) {
    const auto c = signature.find_constant(record.args[i]);
    if (!c) throw ParseError("unknown constant '" + record.args[i] + "'", record.line);
    atom.args[i] = *c;
  }
  return atom;
}

std::vector<GroundAtom> to_atoms(const std::vector<AtomRecord>& records, const Signature& signature) {
  std::vector<GroundAtom> atoms;
  atoms.reserve(records.size());
  for (const auto& r : records) atoms.push_back(to_atom(r, signature));
  return atoms;
}

World make_world(const std::vector<AtomRecord>& records, SignaturePtr signature) {
  World world(signature);
  for (const auto& r : records) {
    const auto atom = to_atom(r, *signature);
    if (r.label.value_or(true)) world.set(atom, true);
  }
  return world;
}

World load_kb(const std::filesystem::path& kb_path, const std::filesystem::path& signature_path,
              const LoadOptions& options) {
  const auto spec = read_signature_file(signature_path);
  auto records = read_atom_file(kb_path);
  const auto signature = resolve_signature(spec, {records}, options);
  return make_world(records, signature);
}

void write_world(std::ostream& out, const World& world) {
  for (AtomIndex a : world.true_atoms()) out << world.signature().format(a) << '\n';
}

void save_world(const World& world, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  write_world(out, world);
}

void write_signature(std::ostream& out, const Signature& signature) {
  for (const auto& p : signature.predicates()) out << p.name << '/' << p.arity << '\n';
  out << "constants:";
  for (const auto& c : signature.constants()) out << ' ' << c;
  out << '\n';
}

std::vector<ExclusionBlock> read_constraints(const std::filesystem::path& path,
                                             const Signature& signature) {
  auto in = open_input(path);
  std::vector<PredicateId> unary, binary;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_comment(raw);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw ParseError("expected 'rule: predicates'", line_no);
    const std::string rule = trim(std::string_view(line).substr(0, colon));
    const int want = rule == "exactly-one" ? 1 : rule == "at-most-one" ? 2 : 0;
    if (want == 0) throw ParseError("unknown rule '" + rule + "'", line_no);
    for (const auto& name : split_list(std::string_view(line).substr(colon + 1))) {
      const auto p = signature.find_predicate(name);
      if (!p) throw ParseError("unknown predicate '" + name + "'", line_no);
      if (signature.predicate(*p).arity != want) {
        throw ParseError(rule + " takes " + (want == 1 ? "unary" : "binary") + " predicates", line_no);
      }
      (want == 1 ? unary : binary).push_back(*p);
    }
  }
  auto blocks = make_exclusion_blocks(signature, unary, binary);
  validate_exclusion_blocks(signature, blocks);
  return blocks;
}

std::vector<IndicatorPotential> parse_rules(std::istream& in, const Signature& signature) {
  std::vector<IndicatorPotential> rules;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip_comment(raw);
    if (line.empty()) continue;
    const auto space = line.find_first_of(" \t");
    if (space == std::string::npos) throw ParseError("expected 'weight formula'", line_no);
    const std::string w = line.substr(0, space);
    double weight = 0.0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), weight);
    if (ec != std::errc{} || ptr != w.data() + w.size()) {
      throw ParseError("invalid weight '" + w + "'", line_no);
    }
    try {
      rules.push_back(IndicatorPotential{Formula::parse(trim(line.substr(space)), signature), weight});
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return rules;
}

std::vector<IndicatorPotential> read_rules(const std::filesystem::path& path,
                                           const Signature& signature) {
  auto in = open_input(path);
  return parse_rules(in, signature);
}

std::string serialize_model(const PotentialModel& model, const Signature& signature) {
  model.validate(signature);
  json j;
  j["format"] = "nmln-model";
  j["version"] = kModelFormatVersion;
  j["signature_hash"] = hex64(signature.hash(!model.symmetric()));
  json preds = json::array();
  for (const auto& p : signature.predicates()) preds.push_back({{"name", p.name}, {"arity", p.arity}});
  j["predicates"] = std::move(preds);
  if (!model.symmetric()) j["constants"] = signature.constants();
  j["k"] = model.k;
  if (model.net) {
    json acts = json::array();
    for (auto a : model.net->activations()) acts.push_back(std::string(to_string(a)));
    j["net"] = {{"widths", model.net->widths()},
                {"activations", std::move(acts)},
                {"parameters", std::vector<double>(model.net->parameters().begin(),
                                                   model.net->parameters().end())}};
  }
  j["betas"] = model.betas;
  if (model.embeddings) {
    j["embeddings"] = {{"dim", model.embeddings->dim}, {"values", model.embeddings->values}};
  }
  json rules = json::array();
  for (const auto& r : model.indicators) rules.push_back({{"formula", r.formula.text()}, {"weight", r.weight}});
  j["indicators"] = std::move(rules);
  return j.dump(1) + "\n";
}

PotentialModel deserialize_model(const std::string& text, const Signature& signature) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "nmln-model") throw ModelFormatError("not a model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw ModelFormatError("unsupported model version " + std::to_string(version));
    }
    PotentialModel model;
    model.k = j.at("k").get<int>();
    if (j.contains("net")) {
      const auto& n = j.at("net");
      std::vector<Activation> acts;
      for (const auto& a : n.at("activations")) acts.push_back(parse_activation(a.get<std::string>()));
      DenseNet net(n.at("widths").get<std::vector<int>>(), std::move(acts));
      const auto params = n.at("parameters").get<std::vector<double>>();
      if (params.size() != net.num_parameters()) throw ModelFormatError("network parameter count mismatch");
      std::copy(params.begin(), params.end(), net.mutable_parameters().begin());
      model.net = std::move(net);
    }
    model.betas = j.at("betas").get<std::vector<double>>();
    if (j.contains("embeddings")) {
      EmbeddingTable e;
      e.dim = j.at("embeddings").at("dim").get<int>();
      e.values = j.at("embeddings").at("values").get<std::vector<double>>();
      model.embeddings = std::move(e);
    }
    const std::string stored = j.at("signature_hash").get<std::string>();
    if (stored != hex64(signature.hash(!model.symmetric()))) {
      throw ModelFormatError("signature hash mismatch: model was trained on a different signature");
    }
    for (const auto& r : j.at("indicators")) {
      model.indicators.push_back(IndicatorPotential{
          Formula::parse(r.at("formula").get<std::string>(), signature), r.at("weight").get<double>()});
    }
    try {
      model.validate(signature);
    } catch (const Error& e) {
      throw ModelFormatError(std::string("inconsistent model: ") + e.what());
    }
    return model;
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const PotentialModel& model, const Signature& signature,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << serialize_model(model, signature);
}

PotentialModel load_model(const std::filesystem::path& path, const Signature& signature) {
  auto in = open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str(), signature);
}

}  // namespace nmln
