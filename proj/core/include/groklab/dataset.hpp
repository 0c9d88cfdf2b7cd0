// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "groklab/error.hpp"

namespace groklab {

/// The modular-addition task (x + y) mod p over Z_p. The full example
/// universe has exactly p^2 input pairs.
struct ModTask {
  int p = 97;
};

struct Example {
  int x = 0;
  int y = 0;
  int label = 0;  // (x + y) mod p
  bool operator==(const Example&) const = default;
};

/// (x + y) mod p for 0 <= x, y < p. Out-of-range inputs raise DomainError.
int mod_add(int x, int y, int p);

/// All p^2 examples in lexicographic (x, y) order.
std::vector<Example> enumerate_pairs(int p);

/// The alpha-fraction partition of the p^2 pairs into train and validation
/// sets. Pure function of (p, alpha, seed): the enumerated pairs are
/// shuffled by Fisher-Yates driven by SplitMix64(seed), the first
/// floor(alpha * p^2) go to train, the rest to val.
struct Split {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::vector<Example> train;
  std::vector<Example> val;
};

Split split_dataset(const ModTask& task, double alpha, std::uint64_t seed);

/// Token -> index map covering the p residues plus "+" and "=". The standard
/// vocabulary assigns residue r -> r, "+" -> p, "=" -> p + 1 (indices
/// contiguous from 0, size p + 2); arbitrary injective assignments can be
/// constructed for compatibility with multi-operation dictionaries.
class TokenVocab {
 public:
  /// token ids for residues 0..p-1 plus the two operator tokens.
  TokenVocab(int p, std::vector<int> residue_ids, int plus_id, int equals_id);
  static TokenVocab standard(int p);

  int p() const { return p_; }
  int residue(int r) const;
  int plus() const { return plus_id_; }
  int equals() const { return equals_id_; }
  /// Inverse lookup of a residue id; IndexError if the id is not a residue.
  int residue_of_id(int id) const;
  /// Number of distinct ids when contiguous from 0; max id + 1 otherwise.
  int extent() const;

 private:
  int p_;
  std::vector<int> residue_ids_;
  int plus_id_;
  int equals_id_;
  std::map<int, int> id_to_residue_;
};

/// Simple three-input encoding: tokens [x, y, p] and a p-way class target.
/// The third token is the constant p, so the token id space is [0, p].
struct SimpleEncoded {
  std::array<int, 3> input;
  int target;
};
SimpleEncoded encode_simple(const Example& ex, const ModTask& task);
Example decode_simple(const SimpleEncoded& enc, const ModTask& task);

/// Dictionary-index encoding: tokens [id(x), id(+), id(y), id(=)] with the
/// target id(label).
struct DictEncoded {
  std::array<int, 4> input;
  int target;
};
DictEncoded encode_dictionary(const Example& ex, const TokenVocab& vocab);
Example decode_dictionary(const DictEncoded& enc, const TokenVocab& vocab);

/// Dataset dump: header `x,y,label,split`, one `x,y,label,{train|val}` line
/// per example (train set first, then val).
void write_dataset_csv(const Split& split, const std::string& path);

}  // namespace groklab
