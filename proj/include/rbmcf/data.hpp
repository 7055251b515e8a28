// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "rbmcf/errors.hpp"
#include "rbmcf/model.hpp"

namespace rbmcf {

// Sparse per-user ratings at K discrete levels. Indices are dense and
// 0-based; external MovieLens ids are kept in the id tables. Per-user lists
// are sorted by item. Timestamps are retained only for split ordering.
struct RatingDataset {
    struct Rating {
        int item;
        int level;    // 1..K
        int64_t ts;
    };

    int K = 5;
    std::vector<int64_t> user_ids;                  // dense index -> external id
    std::vector<int64_t> item_ids;
    std::unordered_map<int64_t, int> user_index;    // external id -> dense index
    std::unordered_map<int64_t, int> item_index;
    std::vector<std::vector<Rating>> users;         // per dense user, sorted by item

    size_t num_users() const { return users.size(); }
    size_t num_items() const { return item_ids.size(); }
    size_t num_ratings() const;

    VisibleState visible_state(size_t user) const;
};

// Per-user holdout: test rows are disjoint from train rows and share the
// same index maps.
struct SplitDataset {
    RatingDataset train;
    RatingDataset test;
};

enum class HoldoutOrder { FirstByTimestamp, SeededRandom };

// Parse MovieLens-style CSV (userId,movieId,rating,timestamp; header row
// required). Ratings are decimals in (0,5], discretized by round-half-up and
// clamped to 1..K. Duplicate (user,item) keeps the last occurrence.
RatingDataset parse_ratings(std::istream& stream, int K);
RatingDataset parse_ratings_file(const std::string& path, int K);

// Retain users with at least `threshold` distinct rated items; the item map
// is re-densified over surviving ratings.
RatingDataset filter_min_ratings(const RatingDataset& d, int threshold);

// Move `per_user` ratings of each user into the test set (earliest by
// timestamp, or a seeded shuffle). Users with <= per_user ratings keep
// everything in train and contribute no test rows.
SplitDataset holdout_split(const RatingDataset& d, int per_user, HoldoutOrder order,
                           uint64_t seed = 0);

// Binary model file: magic "RBMCF1", dims, item ids, W/b/c as little-endian
// doubles, trailing CRC-32. load(save(x)) is bit-identical.
void save_model(const RbmParams& p, const std::vector<int64_t>& item_ids,
                const std::string& path);
struct LoadedModel {
    RbmParams params;
    std::vector<int64_t> item_ids;
};
LoadedModel load_model(const std::string& path);

// Dataset cache holding a train/test split, magic "RBDS1", same CRC framing.
void save_split(const SplitDataset& s, const std::string& path);
SplitDataset load_split(const std::string& path);

}  // namespace rbmcf
