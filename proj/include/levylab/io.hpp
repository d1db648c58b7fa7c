#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "levylab/chaos.hpp"
#include "levylab/model.hpp"

namespace levylab {

// model + net in one flat document: gamma, sigma, jump_atoms [[x, lambda]...],
// horizon, points, coarse_partition
nlohmann::json model_net_to_json(const LevyModel& model, const TimeNet& net);
void model_net_from_json(const nlohmann::json& j, LevyModel& model, TimeNet& net);

// kernel sets: {partition, atoms, level0, levels:[{n, entries:[{alpha, marks, coef}]}]}
// alpha is 1-based and canonical (sorted); loaders reject non-canonical input
nlohmann::json kernel_to_json(const ChaosKernelSet& xi);
ChaosKernelSet kernel_from_json(const nlohmann::json& j);

// streaming CSV writer: UTF-8, header row, '.' decimal separator, %.17g
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& values);
    void close();

private:
    std::FILE* file_ = nullptr;
    std::size_t n_cols_ = 0;
};

std::string format_double(double v);

// SHA-256 of a byte string / file, hex encoded
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

} // namespace levylab
