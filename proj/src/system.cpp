#include "isored/system.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "isored/error.hpp"

namespace isored {

std::vector<double> Trajectory::column(std::size_t m) const {
    require(m < outputs(), ErrorCode::DimensionMismatch, "output column out of range");
    std::vector<double> out;
    out.reserve(y.size());
    for (const auto& row : y) out.push_back(row[m]);
    return out;
}

std::vector<std::string> SystemUnderTest::output_names() const {
    std::vector<std::string> names;
    for (std::size_t m = 0; m < outputs(); ++m) names.push_back("y" + std::to_string(m + 1));
    return names;
}

std::size_t sample_count(double t_end, double sample_dt) {
    require(sample_dt > 0.0 && t_end >= 0.0, ErrorCode::InvalidArgument, "need sample_dt > 0 and t_end >= 0");
    return static_cast<std::size_t>(std::llround(t_end / sample_dt)) + 1;
}

int substeps(double sample_dt, double max_step) {
    require(sample_dt > 0.0 && max_step > 0.0, ErrorCode::InvalidArgument, "steps must be positive");
    return std::max(1, static_cast<int>(std::ceil(sample_dt / max_step - 1e-9)));
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void write_csv(std::ostream& os, const Trajectory& traj) {
    os << "t";
    for (const auto& n : traj.names) os << ',' << n;
    os << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < traj.samples(); ++i) {
        os << traj.times[i];
        for (double v : traj.y[i]) os << ',' << v;
        os << '\n';
    }
}

void write_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream os(path);
    require(os.good(), ErrorCode::IoError, "cannot write " + path);
    write_csv(os, traj);
    require(os.good(), ErrorCode::IoError, "failed writing " + path);
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
}

}  // namespace

Trajectory read_csv(std::istream& is) {
    Trajectory traj;
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), ErrorCode::IoError, "empty trajectory file");
    auto header = split(line);
    require(header.size() >= 2, ErrorCode::IoError, "trajectory needs a time column and at least one output");
    traj.names.assign(header.begin() + 1, header.end());
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split(line);
        require(cells.size() == header.size(), ErrorCode::IoError, "row " + std::to_string(row) + " has wrong width");
        try {
            traj.times.push_back(std::stod(cells[0]));
            std::vector<double> values;
            for (std::size_t i = 1; i < cells.size(); ++i) values.push_back(std::stod(cells[i]));
            traj.y.push_back(std::move(values));
        } catch (const std::exception&) {
            throw Error(ErrorCode::IoError, "row " + std::to_string(row) + " is not numeric");
        }
    }
    return traj;
}

Trajectory read_csv(const std::string& path) {
    std::ifstream is(path);
    require(is.good(), ErrorCode::IoError, "cannot read " + path);
    return read_csv(is);
}

}  // namespace isored
