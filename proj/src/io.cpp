#include "levylab/io.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace levylab {

using nlohmann::json;

json model_net_to_json(const LevyModel& model, const TimeNet& net) {
    json j;
    j["gamma"] = model.gamma;
    j["sigma"] = model.sigma;
    json atoms = json::array();
    for (const auto& a : model.jump_atoms) atoms.push_back({a.size, a.intensity});
    j["jump_atoms"] = atoms;
    j["horizon"] = model.horizon;
    j["points"] = net.points;
    j["coarse_partition"] = net.coarse;
    return j;
}

void model_net_from_json(const json& j, LevyModel& model, TimeNet& net) {
    model.gamma = j.at("gamma").get<double>();
    model.sigma = j.at("sigma").get<double>();
    model.jump_atoms.clear();
    for (const auto& a : j.at("jump_atoms"))
        model.jump_atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
    model.horizon = j.at("horizon").get<double>();
    model.validate();
    net.points = j.at("points").get<std::vector<double>>();
    net.coarse = j.at("coarse_partition").get<std::vector<double>>();
    net.validate();
}

json kernel_to_json(const ChaosKernelSet& xi) {
    json j;
    j["partition"] = xi.partition();
    json atoms = json::array();
    for (const auto& a : xi.atoms()) atoms.push_back({a.mark, a.mass});
    j["atoms"] = atoms;
    j["level0"] = xi.level0();
    json levels = json::array();
    for (int n = 1; n <= xi.max_level(); ++n) {
        if (xi.entries(n).empty()) continue;
        json level;
        level["n"] = n;
        json entries = json::array();
        for (const auto& e : xi.entries(n)) {
            json entry;
            std::vector<int> alpha, marks;
            for (const auto& p : e.pairs) {
                alpha.push_back(p.cell + 1);  // 1-based outside
                marks.push_back(p.atom);
            }
            entry["alpha"] = alpha;
            entry["marks"] = marks;
            entry["coef"] = e.coef;
            entries.push_back(entry);
        }
        level["entries"] = entries;
        levels.push_back(level);
    }
    j["levels"] = levels;
    return j;
}

ChaosKernelSet kernel_from_json(const json& j) {
    std::vector<double> partition = j.at("partition").get<std::vector<double>>();
    std::vector<MarkAtom> atoms;
    for (const auto& a : j.at("atoms")) atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
    ChaosKernelSet xi(std::move(partition), std::move(atoms));
    if (j.contains("level0")) xi.set_level0(j.at("level0").get<double>());
    std::vector<std::vector<KernelPair>> seen;
    for (const auto& level : j.at("levels")) {
        const int n = level.at("n").get<int>();
        for (const auto& entry : level.at("entries")) {
            const auto alpha = entry.at("alpha").get<std::vector<int>>();
            const auto marks = entry.at("marks").get<std::vector<int>>();
            if (static_cast<int>(alpha.size()) != n || static_cast<int>(marks.size()) != n)
                throw std::invalid_argument("kernel_from_json: entry arity does not match n");
            std::vector<KernelPair> pairs(alpha.size());
            for (std::size_t i = 0; i < alpha.size(); ++i) {
                if (alpha[i] < 1) throw std::invalid_argument("kernel_from_json: alpha is 1-based");
                pairs[i] = {static_cast<std::uint16_t>(alpha[i] - 1),
                            static_cast<std::uint16_t>(marks[i])};
            }
            for (std::size_t i = 1; i < pairs.size(); ++i)
                if (pairs[i] < pairs[i - 1])
                    throw std::invalid_argument(
                        "kernel_from_json: non-canonical entry (pairs not sorted)");
            for (const auto& s : seen)
                if (s == pairs)
                    throw std::invalid_argument(
                        "kernel_from_json: non-canonical input (duplicate multiset)");
            seen.push_back(pairs);
            xi.add_entry(std::move(pairs), entry.at("coef").get<double>());
        }
    }
    return xi;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : n_cols_(header.size()) {
    file_ = std::fopen(path.c_str(), "wb");
    if (!file_) throw std::runtime_error("CsvWriter: cannot open " + path);
    for (std::size_t i = 0; i < header.size(); ++i)
        std::fprintf(file_, "%s%s", header[i].c_str(), i + 1 < header.size() ? "," : "\n");
}

CsvWriter::~CsvWriter() { close(); }

void CsvWriter::close() {
    if (file_) {
        std::fclose(file_);
        file_ = nullptr;
    }
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != n_cols_) throw std::invalid_argument("CsvWriter: column count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i)
        std::fprintf(file_, "%s%s", format_double(values[i]).c_str(),
                     i + 1 < values.size() ? "," : "\n");
}

void CsvWriter::row_mixed(const std::vector<std::string>& values) {
    if (values.size() != n_cols_) throw std::invalid_argument("CsvWriter: column count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i)
        std::fprintf(file_, "%s%s", values[i].c_str(), i + 1 < values.size() ? "," : "\n");
}

namespace {

// SHA-256 (FIPS 180-4)
struct Sha256 {
    std::array<std::uint32_t, 8> h{0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
                                   0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
    std::array<std::uint8_t, 64> block{};
    std::size_t block_len = 0;
    std::uint64_t total = 0;

    static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

    void process(const std::uint8_t* p) {
        static const std::uint32_t k[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
            0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
            0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
            0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
            0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
            0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
            0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
            0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
            0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
            0xc67178f2};
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(p[i * 4]) << 24) | (std::uint32_t(p[i * 4 + 1]) << 16) |
                   (std::uint32_t(p[i * 4 + 2]) << 8) | std::uint32_t(p[i * 4 + 3]);
        for (int i = 16; i < 64; ++i) {
            const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        auto a = h;
        for (int i = 0; i < 64; ++i) {
            const std::uint32_t s1 = rotr(a[4], 6) ^ rotr(a[4], 11) ^ rotr(a[4], 25);
            const std::uint32_t ch = (a[4] & a[5]) ^ (~a[4] & a[6]);
            const std::uint32_t t1 = a[7] + s1 + ch + k[i] + w[i];
            const std::uint32_t s0 = rotr(a[0], 2) ^ rotr(a[0], 13) ^ rotr(a[0], 22);
            const std::uint32_t maj = (a[0] & a[1]) ^ (a[0] & a[2]) ^ (a[1] & a[2]);
            const std::uint32_t t2 = s0 + maj;
            a[7] = a[6]; a[6] = a[5]; a[5] = a[4]; a[4] = a[3] + t1;
            a[3] = a[2]; a[2] = a[1]; a[1] = a[0]; a[0] = t1 + t2;
        }
        for (int i = 0; i < 8; ++i) h[i] += a[i];
    }

    void update(const std::uint8_t* p, std::size_t n) {
        total += n;
        while (n > 0) {
            const std::size_t take = std::min(n, block.size() - block_len);
            std::memcpy(block.data() + block_len, p, take);
            block_len += take;
            p += take;
            n -= take;
            if (block_len == block.size()) {
                process(block.data());
                block_len = 0;
            }
        }
    }

    std::string finish() {
        const std::uint64_t bits = total * 8;
        const std::uint8_t one = 0x80;
        update(&one, 1);
        const std::uint8_t zero = 0;
        while (block_len != 56) update(&zero, 1);
        std::uint8_t len[8];
        for (int i = 0; i < 8; ++i) len[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
        update(len, 8);
        static const char* hex = "0123456789abcdef";
        std::string out;
        out.reserve(64);
        for (std::uint32_t v : h)
            for (int i = 28; i >= 0; i -= 4) out.push_back(hex[(v >> i) & 0xF]);
        return out;
    }
};

} // namespace

std::string sha256_hex(const std::string& bytes) {
    Sha256 s;
    s.update(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
    return s.finish();
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_file: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_file: cannot open " + path);
    out << content;
}

} // namespace levylab
