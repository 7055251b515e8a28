// SPDX-License-Identifier: Apache-2.0
#include "rbmcf/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rbmcf/rng.hpp"

namespace rbmcf {

size_t RatingDataset::num_ratings() const {
    size_t n = 0;
    for (const auto& u : users) n += u.size();
    return n;
}

VisibleState RatingDataset::visible_state(size_t user) const {
    VisibleState v;
    const auto& rs = users.at(user);
    v.items.reserve(rs.size());
    v.levels.reserve(rs.size());
    for (const auto& r : rs) {
        v.items.push_back(r.item);
        v.levels.push_back(r.level);
    }
    return v;
}

namespace {

int discretize(double rating, int K) {
    int level = static_cast<int>(std::floor(rating + 0.5));  // round half up
    return std::min(K, std::max(1, level));
}

void sort_user_ratings(RatingDataset& d) {
    for (auto& u : d.users)
        std::sort(u.begin(), u.end(),
                  [](const RatingDataset::Rating& a, const RatingDataset::Rating& b) {
                      return a.item < b.item;
                  });
}

}  // namespace

RatingDataset parse_ratings(std::istream& stream, int K) {
    if (K < 1) throw ArgumentError("parse_ratings: K must be >= 1");
    std::string line;
    if (!std::getline(stream, line)) throw ParseError("parse_ratings: empty input");
    if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0])))
        throw ParseError("parse_ratings: header row required, got data at line 1");

    RatingDataset d;
    d.K = K;
    // Per user: item -> position in d.users[u]; duplicates keep the last row.
    std::vector<std::unordered_map<int, size_t>> seen;

    size_t line_no = 1;
    while (std::getline(stream, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();

        int64_t user_ext, item_ext, ts;
        double rating;
        {
            std::istringstream ss(line);
            std::string f0, f1, f2, f3;
            if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') ||
                !std::getline(ss, f2, ',') || !std::getline(ss, f3))
                throw ParseError("parse_ratings: malformed row at line " + std::to_string(line_no));
            try {
                user_ext = std::stoll(f0);
                item_ext = std::stoll(f1);
                rating = std::stod(f2);
                ts = std::stoll(f3);
            } catch (const std::exception&) {
                throw ParseError("parse_ratings: malformed row at line " + std::to_string(line_no));
            }
        }
        if (!(rating > 0.0) || rating > 5.0)
            throw RangeError("parse_ratings: rating out of (0,5] at line " + std::to_string(line_no));

        int u;
        auto uit = d.user_index.find(user_ext);
        if (uit == d.user_index.end()) {
            u = static_cast<int>(d.user_ids.size());
            d.user_index.emplace(user_ext, u);
            d.user_ids.push_back(user_ext);
            d.users.emplace_back();
            seen.emplace_back();
        } else {
            u = uit->second;
        }
        int i;
        auto iit = d.item_index.find(item_ext);
        if (iit == d.item_index.end()) {
            i = static_cast<int>(d.item_ids.size());
            d.item_index.emplace(item_ext, i);
            d.item_ids.push_back(item_ext);
        } else {
            i = iit->second;
        }

        RatingDataset::Rating r{i, discretize(rating, K), ts};
        auto su = seen[static_cast<size_t>(u)].find(i);
        if (su != seen[static_cast<size_t>(u)].end()) {
            d.users[static_cast<size_t>(u)][su->second] = r;
        } else {
            seen[static_cast<size_t>(u)].emplace(i, d.users[static_cast<size_t>(u)].size());
            d.users[static_cast<size_t>(u)].push_back(r);
        }
    }
    sort_user_ratings(d);
    return d;
}

RatingDataset parse_ratings_file(const std::string& path, int K) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open ratings file: " + path);
    return parse_ratings(in, K);
}

RatingDataset filter_min_ratings(const RatingDataset& d, int threshold) {
    if (threshold < 1) throw ArgumentError("filter_min_ratings: threshold must be >= 1");

    RatingDataset out;
    out.K = d.K;
    for (size_t u = 0; u < d.users.size(); ++u) {
        if (static_cast<int>(d.users[u].size()) < threshold) continue;
        int nu = static_cast<int>(out.user_ids.size());
        out.user_ids.push_back(d.user_ids[u]);
        out.user_index.emplace(d.user_ids[u], nu);
        out.users.emplace_back();
        auto& dst = out.users.back();
        for (const auto& r : d.users[u]) {
            int64_t ext = d.item_ids[static_cast<size_t>(r.item)];
            auto it = out.item_index.find(ext);
            int ni;
            if (it == out.item_index.end()) {
                ni = static_cast<int>(out.item_ids.size());
                out.item_index.emplace(ext, ni);
                out.item_ids.push_back(ext);
            } else {
                ni = it->second;
            }
            dst.push_back({ni, r.level, r.ts});
        }
    }
    if (out.users.empty()) throw DataError("filter_min_ratings: no users survive the threshold");
    sort_user_ratings(out);
    return out;
}

SplitDataset holdout_split(const RatingDataset& d, int per_user, HoldoutOrder order,
                           uint64_t seed) {
    if (per_user < 1) throw ArgumentError("holdout_split: per_user must be >= 1");

    SplitDataset s;
    s.train.K = s.test.K = d.K;
    s.train.user_ids = s.test.user_ids = d.user_ids;
    s.train.item_ids = s.test.item_ids = d.item_ids;
    s.train.user_index = s.test.user_index = d.user_index;
    s.train.item_index = s.test.item_index = d.item_index;
    s.train.users.resize(d.users.size());
    s.test.users.resize(d.users.size());

    for (size_t u = 0; u < d.users.size(); ++u) {
        const auto& rs = d.users[u];
        if (static_cast<int>(rs.size()) <= per_user) {
            s.train.users[u] = rs;
            continue;
        }
        std::vector<size_t> idx(rs.size());
        std::iota(idx.begin(), idx.end(), 0);
        if (order == HoldoutOrder::FirstByTimestamp) {
            std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
                if (rs[a].ts != rs[b].ts) return rs[a].ts < rs[b].ts;
                return rs[a].item < rs[b].item;
            });
        } else {
            RngStream rng(seed, 0x484f4c44u ^ static_cast<uint64_t>(u));
            for (size_t t = idx.size() - 1; t > 0; --t) {
                size_t r = static_cast<size_t>(rng.next_u64() % (t + 1));
                std::swap(idx[t], idx[r]);
            }
        }
        std::vector<bool> held(rs.size(), false);
        for (int t = 0; t < per_user; ++t) held[idx[static_cast<size_t>(t)]] = true;
        for (size_t t = 0; t < rs.size(); ++t)
            (held[t] ? s.test.users[u] : s.train.users[u]).push_back(rs[t]);
    }
    sort_user_ratings(s.train);
    sort_user_ratings(s.test);
    return s;
}

// ---- binary file framing -------------------------------------------------

namespace {

class Writer {
public:
    void raw(const void* p, size_t n) {
        const uint8_t* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void u64(uint64_t v) {
        uint8_t b[8];
        for (int t = 0; t < 8; ++t) b[t] = static_cast<uint8_t>(v >> (8 * t));
        raw(b, 8);
    }
    void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }

    void write_with_crc(const std::string& path) {
        uint32_t crc = static_cast<uint32_t>(
            crc32(0L, buf_.data(), static_cast<uInt>(buf_.size())));
        uint8_t tail[4];
        for (int t = 0; t < 4; ++t) tail[t] = static_cast<uint8_t>(crc >> (8 * t));
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open for write: " + path);
        out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<long>(buf_.size()));
        out.write(reinterpret_cast<const char*>(tail), 4);
        if (!out) throw DataError("write failed: " + path);
    }

private:
    std::vector<uint8_t> buf_;
};

class Reader {
public:
    Reader(const std::string& path, const char* magic, size_t magic_len) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open: " + path);
        buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        if (buf_.size() < magic_len + 4) throw FormatError("truncated file: " + path);
        if (std::memcmp(buf_.data(), magic, magic_len) != 0)
            throw FormatError("wrong magic in " + path);
        uint32_t stored = 0;
        for (int t = 0; t < 4; ++t)
            stored |= static_cast<uint32_t>(buf_[buf_.size() - 4 + static_cast<size_t>(t)]) << (8 * t);
        uint32_t actual = static_cast<uint32_t>(
            crc32(0L, buf_.data(), static_cast<uInt>(buf_.size() - 4)));
        if (stored != actual) throw FormatError("CRC mismatch in " + path);
        off_ = magic_len;
        end_ = buf_.size() - 4;
    }

    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int t = 0; t < 8; ++t) v |= static_cast<uint64_t>(buf_[off_ + static_cast<size_t>(t)]) << (8 * t);
        off_ += 8;
        return v;
    }
    int64_t i64() { return static_cast<int64_t>(u64()); }
    double f64() {
        uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    void done() const {
        if (off_ != end_) throw FormatError("trailing bytes in payload");
    }

private:
    void need(size_t n) const {
        if (off_ + n > end_) throw FormatError("truncated payload");
    }
    std::vector<uint8_t> buf_;
    size_t off_ = 0, end_ = 0;
};

constexpr char kModelMagic[] = "RBMCF1";
constexpr char kSplitMagic[] = "RBDS1";

void write_ratings(Writer& w, const RatingDataset& d) {
    w.u64(d.users.size());
    for (const auto& u : d.users) {
        w.u64(u.size());
        for (const auto& r : u) {
            w.u64(static_cast<uint64_t>(r.item));
            w.u64(static_cast<uint64_t>(r.level));
            w.i64(r.ts);
        }
    }
}

void read_ratings(Reader& r, RatingDataset& d, size_t nusers, size_t nitems) {
    if (r.u64() != nusers) throw FormatError("user count mismatch in split section");
    d.users.resize(nusers);
    for (auto& u : d.users) {
        size_t n = r.u64();
        u.resize(n);
        for (auto& rr : u) {
            rr.item = static_cast<int>(r.u64());
            rr.level = static_cast<int>(r.u64());
            rr.ts = r.i64();
            if (rr.item < 0 || static_cast<size_t>(rr.item) >= nitems ||
                rr.level < 1 || rr.level > d.K)
                throw FormatError("rating out of range in split file");
        }
    }
}

}  // namespace

void save_model(const RbmParams& p, const std::vector<int64_t>& item_ids,
                const std::string& path) {
    if (static_cast<int>(item_ids.size()) != p.m)
        throw ShapeError("save_model: item id table must have m entries");
    Writer w;
    w.raw(kModelMagic, 6);
    w.u64(static_cast<uint64_t>(p.m));
    w.u64(static_cast<uint64_t>(p.F));
    w.u64(static_cast<uint64_t>(p.K));
    for (int64_t id : item_ids) w.i64(id);
    for (double x : p.W) w.f64(x);
    for (double x : p.b) w.f64(x);
    for (double x : p.c) w.f64(x);
    w.write_with_crc(path);
}

LoadedModel load_model(const std::string& path) {
    Reader r(path, kModelMagic, 6);
    int m = static_cast<int>(r.u64());
    int F = static_cast<int>(r.u64());
    int K = static_cast<int>(r.u64());
    if (m <= 0 || F <= 0 || K <= 0) throw FormatError("bad dimensions in model file");
    LoadedModel out{RbmParams(m, F, K), {}};
    out.item_ids.resize(static_cast<size_t>(m));
    for (auto& id : out.item_ids) id = r.i64();
    for (auto& x : out.params.W) x = r.f64();
    for (auto& x : out.params.b) x = r.f64();
    for (auto& x : out.params.c) x = r.f64();
    r.done();
    return out;
}

void save_split(const SplitDataset& s, const std::string& path) {
    Writer w;
    w.raw(kSplitMagic, 5);
    w.u64(static_cast<uint64_t>(s.train.K));
    w.u64(s.train.user_ids.size());
    w.u64(s.train.item_ids.size());
    for (int64_t id : s.train.user_ids) w.i64(id);
    for (int64_t id : s.train.item_ids) w.i64(id);
    write_ratings(w, s.train);
    write_ratings(w, s.test);
    w.write_with_crc(path);
}

SplitDataset load_split(const std::string& path) {
    Reader r(path, kSplitMagic, 5);
    SplitDataset s;
    int K = static_cast<int>(r.u64());
    size_t nusers = r.u64();
    size_t nitems = r.u64();
    s.train.K = s.test.K = K;
    s.train.user_ids.resize(nusers);
    for (auto& id : s.train.user_ids) id = r.i64();
    s.train.item_ids.resize(nitems);
    for (auto& id : s.train.item_ids) id = r.i64();
    for (size_t t = 0; t < nusers; ++t) s.train.user_index.emplace(s.train.user_ids[t], static_cast<int>(t));
    for (size_t t = 0; t < nitems; ++t) s.train.item_index.emplace(s.train.item_ids[t], static_cast<int>(t));
    s.test.user_ids = s.train.user_ids;
    s.test.item_ids = s.train.item_ids;
    s.test.user_index = s.train.user_index;
    s.test.item_index = s.train.item_index;
    read_ratings(r, s.train, nusers, nitems);
    read_ratings(r, s.test, nusers, nitems);
    r.done();
    return s;
}

}  // namespace rbmcf
