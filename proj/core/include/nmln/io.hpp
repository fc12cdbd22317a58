#pragma once

// Plain-text datasets and JSON model files.
//
// Signature file, one entry per line ('#' starts a comment):
//   friendOf/2
//   smokes/1
//   constants: Anna, Bob, Chris        (optional; otherwise taken from data)
//
// Atom files: one ground atom per line, optionally followed by a 0/1 label:
//   friendOf(Anna, Bob)
//   smokes(Bob) 0

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nmln/gibbs.hpp"
#include "nmln/potential.hpp"
#include "nmln/relational.hpp"

namespace nmln {

struct SignatureSpec {
  std::vector<Predicate> predicates;
  /// Present iff the file had a constants line.
  std::optional<std::vector<std::string>> constants;
};

SignatureSpec parse_signature(std::istream& in);
SignatureSpec read_signature_file(const std::filesystem::path& path);

struct AtomRecord {
  std::string predicate;
  std::vector<std::string> args;
  std::optional<bool> label;
  std::size_t line = 0;
};

std::vector<AtomRecord> parse_atoms(std::istream& in);
std::vector<AtomRecord> read_atom_file(const std::filesystem::path& path);

struct LoadOptions {
  /// Unknown constants and predicates extend the signature instead of failing.
  bool auto_extend = false;
};

/// Builds the signature from the spec, taking constants (in first-appearance
/// order) from the record sets when the spec lists none. Throws ParseError on
/// unknown symbols unless auto-extending, and on arity mismatches.
SignaturePtr resolve_signature(const SignatureSpec& spec,
                               const std::vector<std::vector<AtomRecord>>& record_sets,
                               const LoadOptions& options = {});

GroundAtom to_atom(const AtomRecord& record, const Signature& signature);
std::vector<GroundAtom> to_atoms(const std::vector<AtomRecord>& records, const Signature& signature);

/// World with the listed atoms true (labels other than 0) and every other atom false.
World make_world(const std::vector<AtomRecord>& records, SignaturePtr signature);

/// Reads the signature file and KB file together.
World load_kb(const std::filesystem::path& kb_path, const std::filesystem::path& signature_path,
              const LoadOptions& options = {});

/// True atoms, one per line, in canonical order.
void write_world(std::ostream& out, const World& world);
void save_world(const World& world, const std::filesystem::path& path);
void write_signature(std::ostream& out, const Signature& signature);

/// Lines "exactly-one: p q ..." (unary predicates) and
/// "at-most-one: r s ..." (binary predicates).
std::vector<ExclusionBlock> read_constraints(const std::filesystem::path& path,
                                             const Signature& signature);

/// Lines "weight formula".
std::vector<IndicatorPotential> parse_rules(std::istream& in, const Signature& signature);
std::vector<IndicatorPotential> read_rules(const std::filesystem::path& path,
                                           const Signature& signature);

inline constexpr int kModelFormatVersion = 1;

/// JSON with every double printed for exact round trip. The signature hash
/// covers predicates, and constants too when the model has embeddings.
std::string serialize_model(const PotentialModel& model, const Signature& signature);
PotentialModel deserialize_model(const std::string& text, const Signature& signature);
void save_model(const PotentialModel& model, const Signature& signature,
                const std::filesystem::path& path);
/// Throws ModelFormatError on version or signature-hash mismatch.
PotentialModel load_model(const std::filesystem::path& path, const Signature& signature);

}  // namespace nmln
