// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include "groklab/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "groklab/rng.hpp"

namespace groklab {

int mod_add(int x, int y, int p) {
  if (p < 2) throw DomainError("mod_add: p must be >= 2, got " + std::to_string(p));
  if (x < 0 || x >= p || y < 0 || y >= p) {
    throw DomainError("mod_add: inputs (" + std::to_string(x) + ", " +
                      std::to_string(y) + ") outside [0, " + std::to_string(p) + ")");
  }
  return (x + y) % p;
}

std::vector<Example> enumerate_pairs(int p) {
  if (p < 2) throw DomainError("enumerate_pairs: p must be >= 2");
  std::vector<Example> out;
  out.reserve(static_cast<std::size_t>(p) * static_cast<std::size_t>(p));
  for (int x = 0; x < p; ++x) {
    for (int y = 0; y < p; ++y) out.push_back({x, y, (x + y) % p});
  }
  return out;
}

Split split_dataset(const ModTask& task, double alpha, std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("split_dataset: alpha must lie in (0, 1), got " +
                      std::to_string(alpha));
  }
  std::vector<Example> pool = enumerate_pairs(task.p);
  SplitMix64 rng(seed);
  fisher_yates(pool, rng);
  const auto total = static_cast<double>(pool.size());
  const auto n_train = static_cast<std::size_t>(std::floor(alpha * total));
  Split split;
  split.alpha = alpha;
  split.seed = seed;
  split.train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_train), pool.end());
  return split;
}

TokenVocab::TokenVocab(int p, std::vector<int> residue_ids, int plus_id, int equals_id)
    : p_(p), residue_ids_(std::move(residue_ids)), plus_id_(plus_id), equals_id_(equals_id) {
  if (static_cast<int>(residue_ids_.size()) != p_) {
    throw ConfigError("TokenVocab: need exactly p residue ids");
  }
  for (int r = 0; r < p_; ++r) {
    if (!id_to_residue_.emplace(residue_ids_[static_cast<std::size_t>(r)], r).second) {
      throw ConfigError("TokenVocab: duplicate id " +
                        std::to_string(residue_ids_[static_cast<std::size_t>(r)]));
    }
  }
  if (id_to_residue_.count(plus_id_) || id_to_residue_.count(equals_id_) ||
      plus_id_ == equals_id_) {
    throw ConfigError("TokenVocab: operator ids collide with residue ids");
  }
}

TokenVocab TokenVocab::standard(int p) {
  std::vector<int> ids(static_cast<std::size_t>(p));
  for (int r = 0; r < p; ++r) ids[static_cast<std::size_t>(r)] = r;
  return TokenVocab(p, std::move(ids), p, p + 1);
}

int TokenVocab::residue(int r) const {
  if (r < 0 || r >= p_) {
    throw IndexError("TokenVocab: residue " + std::to_string(r) + " outside [0, " +
                     std::to_string(p_) + ")");
  }
  return residue_ids_[static_cast<std::size_t>(r)];
}

int TokenVocab::residue_of_id(int id) const {
  auto it = id_to_residue_.find(id);
  if (it == id_to_residue_.end()) {
    throw IndexError("TokenVocab: id " + std::to_string(id) + " is not a residue token");
  }
  return it->second;
}

int TokenVocab::extent() const {
  int mx = std::max(plus_id_, equals_id_);
  for (int id : residue_ids_) mx = std::max(mx, id);
  return mx + 1;
}

SimpleEncoded encode_simple(const Example& ex, const ModTask& task) {
  return SimpleEncoded{{ex.x, ex.y, task.p}, ex.label};
}

Example decode_simple(const SimpleEncoded& enc, const ModTask& task) {
  return Example{enc.input[0], enc.input[1], mod_add(enc.input[0], enc.input[1], task.p)};
}

DictEncoded encode_dictionary(const Example& ex, const TokenVocab& vocab) {
  return DictEncoded{
      {vocab.residue(ex.x), vocab.plus(), vocab.residue(ex.y), vocab.equals()},
      vocab.residue(ex.label)};
}

Example decode_dictionary(const DictEncoded& enc, const TokenVocab& vocab) {
  return Example{vocab.residue_of_id(enc.input[0]), vocab.residue_of_id(enc.input[2]),
                 vocab.residue_of_id(enc.target)};
}

void write_dataset_csv(const Split& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "x,y,label,split\n";
  for (const Example& ex : split.train) {
    out << ex.x << ',' << ex.y << ',' << ex.label << ",train\n";
  }
  for (const Example& ex : split.val) {
    out << ex.x << ',' << ex.y << ',' << ex.label << ",val\n";
  }
}

}  // namespace groklab
