// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rbmcf/data.hpp"
#include "rbmcf/rng.hpp"

using namespace rbmcf;

namespace {

RatingDataset parse_text(const std::string& body, int K = 5) {
    std::istringstream in("userId,movieId,rating,timestamp\n" + body);
    return parse_ratings(in, K);
}

RatingDataset synthetic_counts(const std::vector<int>& ratings_per_user) {
    std::ostringstream body;
    for (size_t u = 0; u < ratings_per_user.size(); ++u)
        for (int t = 0; t < ratings_per_user[u]; ++t)
            body << (u + 1) << ',' << (t + 1) << ",3.0," << t << '\n';
    return parse_text(body.str());
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/rbmcf_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("half-star ratings round half up") {
    RatingDataset d = parse_text("1,307,3.5,1256677221\n");
    REQUIRE(d.num_users() == 1);
    REQUIRE(d.num_items() == 1);
    CHECK(d.user_ids[0] == 1);
    CHECK(d.item_ids[0] == 307);
    CHECK(d.users[0][0].level == 4);
    CHECK(d.users[0][0].ts == 1256677221);
}

TEST_CASE("a five-star rating maps to the top level") {
    RatingDataset d = parse_text("1,307,5.0,0\n");
    CHECK(d.users[0][0].level == 5);
}

TEST_CASE("discretization is monotone in the raw rating") {
    int prev = 0;
    for (double r = 0.5; r <= 5.0; r += 0.5) {
        std::ostringstream row;
        row << "1,10," << r << ",0\n";
        int lvl = parse_text(row.str()).users[0][0].level;
        CHECK(lvl >= prev);
        CHECK(lvl >= 1);
        CHECK(lvl <= 5);
        prev = lvl;
    }
}

TEST_CASE("a missing header row is rejected with a line number") {
    std::istringstream in("1,307,3.5,1256677221\n");
    CHECK_THROWS_AS(parse_ratings(in, 5), ParseError);
}

TEST_CASE("malformed rows report their line number") {
    CHECK_THROWS_WITH_AS(parse_text("1,307,3.5\n"),
                         "parse_ratings: malformed row at line 2", ParseError);
    CHECK_THROWS_AS(parse_text("1,abc,3.5,0\n"), ParseError);
}

TEST_CASE("out-of-range ratings are a range error") {
    CHECK_THROWS_AS(parse_text("1,307,0.0,0\n"), RangeError);
    CHECK_THROWS_AS(parse_text("1,307,5.5,0\n"), RangeError);
    CHECK_THROWS_AS(parse_text("1,307,-1.0,0\n"), RangeError);
}

TEST_CASE("duplicate user-item pairs keep the last occurrence") {
    RatingDataset d = parse_text("1,307,2.0,10\n1,307,4.0,20\n");
    REQUIRE(d.num_ratings() == 1);
    CHECK(d.users[0][0].level == 4);
}

TEST_CASE("per-user rating lists are sorted by item") {
    RatingDataset d = parse_text("1,30,3.0,0\n1,10,3.0,1\n1,20,3.0,2\n");
    int prev = -1;
    for (const auto& r : d.users[0]) {
        CHECK(r.item > prev);
        prev = r.item;
    }
}

TEST_CASE("threshold one keeps every user") {
    RatingDataset d = synthetic_counts({3, 7, 1});
    RatingDataset f = filter_min_ratings(d, 1);
    CHECK(f.num_users() == 3);
    CHECK(f.num_ratings() == d.num_ratings());
}

TEST_CASE("a user with exactly the threshold count is retained") {
    RatingDataset d = synthetic_counts({4, 10});
    RatingDataset f = filter_min_ratings(d, 4);
    CHECK(f.num_users() == 2);
}

TEST_CASE("the threshold drops light users and re-densifies items") {
    RatingDataset d = synthetic_counts({5, 100, 150});
    RatingDataset f = filter_min_ratings(d, 100);
    CHECK(f.num_users() == 2);
    CHECK(f.num_items() == 150);  // surviving items only
    for (size_t i = 0; i < f.item_ids.size(); ++i)
        CHECK(f.item_index.at(f.item_ids[i]) == static_cast<int>(i));
}

TEST_CASE("an impossible threshold is an empty-dataset error") {
    RatingDataset d = synthetic_counts({3, 4});
    CHECK_THROWS_AS(filter_min_ratings(d, 1000), DataError);
}

TEST_CASE("holdout keeps the earliest ratings as test rows") {
    RatingDataset d = synthetic_counts({100});
    SplitDataset s = holdout_split(d, 30, HoldoutOrder::FirstByTimestamp);
    CHECK(s.test.users[0].size() == 30);
    CHECK(s.train.users[0].size() == 70);
    // timestamps 0..99: the 30 earliest go to test
    for (const auto& r : s.test.users[0]) CHECK(r.ts < 30);
    for (const auto& r : s.train.users[0]) CHECK(r.ts >= 30);
}

TEST_CASE("users at or below the holdout size keep everything in train") {
    RatingDataset d = synthetic_counts({30});
    SplitDataset s = holdout_split(d, 30, HoldoutOrder::FirstByTimestamp);
    CHECK(s.test.users[0].empty());
    CHECK(s.train.users[0].size() == 30);
}

TEST_CASE("a zero holdout size is rejected") {
    RatingDataset d = synthetic_counts({10});
    CHECK_THROWS_AS(holdout_split(d, 0, HoldoutOrder::FirstByTimestamp), ArgumentError);
}

TEST_CASE("splitting preserves the total rating count") {
    RatingDataset d = synthetic_counts({5, 31, 64, 100, 12});
    RatingDataset f = filter_min_ratings(d, 10);
    for (auto order : {HoldoutOrder::FirstByTimestamp, HoldoutOrder::SeededRandom}) {
        SplitDataset s = holdout_split(f, 30, order, 7);
        CHECK(s.train.num_ratings() + s.test.num_ratings() == f.num_ratings());
        for (size_t u = 0; u < f.num_users(); ++u) {
            // train and test are disjoint per user
            std::vector<int> items;
            for (const auto& r : s.train.users[u]) items.push_back(r.item);
            for (const auto& r : s.test.users[u]) items.push_back(r.item);
            std::sort(items.begin(), items.end());
            CHECK(std::adjacent_find(items.begin(), items.end()) == items.end());
        }
    }
}

TEST_CASE("the seeded-random holdout replays for a fixed seed") {
    RatingDataset d = synthetic_counts({40, 50});
    SplitDataset a = holdout_split(d, 10, HoldoutOrder::SeededRandom, 99);
    SplitDataset b = holdout_split(d, 10, HoldoutOrder::SeededRandom, 99);
    for (size_t u = 0; u < 2; ++u) {
        REQUIRE(a.test.users[u].size() == b.test.users[u].size());
        for (size_t t = 0; t < a.test.users[u].size(); ++t)
            CHECK(a.test.users[u][t].item == b.test.users[u][t].item);
    }
}

TEST_CASE("model files round-trip bit-identically") {
    RbmParams p(3, 4, 5);
    RngStream rng(5, 6);
    for (auto& x : p.W) x = rng.next_normal();
    for (auto& x : p.b) x = rng.next_normal();
    for (auto& x : p.c) x = rng.next_normal();
    std::vector<int64_t> ids = {11, 22, 33};

    TempFile f("model.bin");
    save_model(p, ids, f.path);
    LoadedModel back = load_model(f.path);
    CHECK(back.params.W == p.W);
    CHECK(back.params.b == p.b);
    CHECK(back.params.c == p.c);
    CHECK(back.item_ids == ids);
}

TEST_CASE("a flipped payload byte fails the checksum") {
    RbmParams p(2, 2, 2);
    TempFile f("model_flip.bin");
    save_model(p, {1, 2}, f.path);

    std::fstream io(f.path, std::ios::in | std::ios::out | std::ios::binary);
    io.seekp(32);
    char byte;
    io.seekg(32);
    io.get(byte);
    io.seekp(32);
    io.put(static_cast<char>(byte ^ 0x40));
    io.close();
    CHECK_THROWS_WITH_AS(load_model(f.path), ("CRC mismatch in " + f.path).c_str(), FormatError);
}

TEST_CASE("the wrong magic is rejected before the checksum") {
    TempFile f("model_magic.bin");
    {
        std::ofstream out(f.path, std::ios::binary);
        out << "NOTRBM literally anything else";
    }
    CHECK_THROWS_AS(load_model(f.path), FormatError);
}

TEST_CASE("truncated model files are rejected") {
    TempFile f("model_trunc.bin");
    {
        std::ofstream out(f.path, std::ios::binary);
        out << "RB";
    }
    CHECK_THROWS_AS(load_model(f.path), FormatError);
}

TEST_CASE("split caches round-trip") {
    RatingDataset d = synthetic_counts({40, 50, 60});
    SplitDataset s = holdout_split(d, 10, HoldoutOrder::FirstByTimestamp);
    TempFile f("split.rbds");
    save_split(s, f.path);
    SplitDataset back = load_split(f.path);
    CHECK(back.train.num_ratings() == s.train.num_ratings());
    CHECK(back.test.num_ratings() == s.test.num_ratings());
    CHECK(back.train.item_ids == s.train.item_ids);
    CHECK(back.train.user_ids == s.train.user_ids);
    CHECK(back.train.K == s.train.K);
    for (size_t u = 0; u < s.train.num_users(); ++u)
        for (size_t t = 0; t < s.train.users[u].size(); ++t) {
            CHECK(back.train.users[u][t].item == s.train.users[u][t].item);
            CHECK(back.train.users[u][t].level == s.train.users[u][t].level);
        }
}

TEST_CASE("the full MovieLens small archive parses to its published count") {
    const char* env = std::getenv("RBMCF_ML_SMALL");
    std::string path = env ? env : "";
    if (path.empty()) {
        for (const char* cand : {"data/ml-latest-small/ratings.csv", "ml-latest-small/ratings.csv",
                                 "/root/data/ml-latest-small/ratings.csv"}) {
            std::ifstream probe(cand);
            if (probe) {
                path = cand;
                break;
            }
        }
    }
    if (path.empty()) {
        MESSAGE("ml-latest-small ratings.csv not present; skipping count check");
        return;
    }
    RatingDataset d = parse_ratings_file(path, 5);
    CHECK(d.num_ratings() == 100836);
}
