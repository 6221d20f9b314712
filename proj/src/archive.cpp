#include "robust_lt/archive.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

#include "robust_lt/errors.hpp"

namespace robust_lt {

using nlohmann::json;

namespace {

// JSON has no NaN or infinity, so those travel as strings.
json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

double to_double(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw Error(ErrorKind::Archive, "expected a number");
}

json payload(const SolveRecord& r, bool with_wall_time) {
    json defects = json::array();
    for (const DefectNorms& d : r.defects) {
        defects.push_back({{"position_du", number(d.position)},
                           {"velocity_du_per_tu", number(d.velocity)},
                           {"mass_mu", number(d.mass)}});
    }
    json x = json::array();
    for (const double v : r.x) x.push_back(number(v));
    json j = {
        {"schema", kArchiveSchema},
        {"id", r.id},
        {"scenario", {{"start_indices", r.scenario.start_indices}, {"outage_tu", number(r.scenario.delta_tau)}}},
        {"strategy", r.strategy},
        {"provenance", r.provenance},
        {"seed_index", r.seed_index},
        {"status", to_string(r.status)},
        {"x", std::move(x)},
        {"objective", number(r.objective)},
        {"defects", std::move(defects)},
        {"delta_v_du_per_tu", number(r.delta_v)},
        {"iterations", r.iterations},
        {"hops", r.hops},
        {"accepted_hops", r.accepted_hops},
        {"message", r.message},
    };
    if (with_wall_time) j["wall_time_s"] = number(r.wall_time);
    return j;
}

}  // namespace

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::Archive, "SHA-256 computation failed");
    }
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < length; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
    return os.str();
}

std::string serialize_record(const SolveRecord& record) {
    json j = payload(record, true);
    j["hash"] = sha256_hex(j.dump());
    return j.dump();
}

SolveRecord parse_record(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Archive, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::Archive, "record is not an object");
    if (!j.contains("schema") || j["schema"] != kArchiveSchema) {
        throw Error(ErrorKind::Archive, "unsupported schema version");
    }
    if (!j.contains("hash") || !j["hash"].is_string()) throw Error(ErrorKind::Archive, "missing hash");
    const std::string hash = j["hash"].get<std::string>();
    j.erase("hash");
    if (sha256_hex(j.dump()) != hash) throw Error(ErrorKind::Archive, "hash mismatch");

    SolveRecord r;
    try {
        r.id = j.at("id").get<std::string>();
        r.scenario.start_indices = j.at("scenario").at("start_indices").get<std::vector<int>>();
        r.scenario.delta_tau = to_double(j.at("scenario").at("outage_tu"));
        r.strategy = j.at("strategy").get<std::string>();
        r.provenance = j.at("provenance").get<std::string>();
        r.seed_index = j.at("seed_index").get<long>();
        const auto status = parse_solve_status(j.at("status").get<std::string>());
        if (!status) throw Error(ErrorKind::Archive, "unknown status");
        r.status = *status;
        for (const json& v : j.at("x")) r.x.push_back(to_double(v));
        r.objective = to_double(j.at("objective"));
        for (const json& d : j.at("defects")) {
            r.defects.push_back({to_double(d.at("position_du")), to_double(d.at("velocity_du_per_tu")),
                                 to_double(d.at("mass_mu"))});
        }
        r.delta_v = to_double(j.at("delta_v_du_per_tu"));
        r.wall_time = to_double(j.at("wall_time_s"));
        r.iterations = j.at("iterations").get<int>();
        r.hops = j.at("hops").get<int>();
        r.accepted_hops = j.at("accepted_hops").get<int>();
        r.message = j.at("message").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Archive, std::string("bad record field: ") + e.what());
    }
    return r;
}

std::string payload_digest(const SolveRecord& record) {
    return sha256_hex(payload(record, false).dump());
}

std::string archive_digest(const std::vector<SolveRecord>& records) {
    std::string all;
    for (const SolveRecord& r : records) all += payload_digest(r) + '\n';
    return sha256_hex(all);
}

ArchiveContents read_archive(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Archive, "cannot open archive " + path.string());
    ArchiveContents out;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ++out.total_lines;
        try {
            out.records.push_back(parse_record(line));
        } catch (const Error& e) {
            ++out.corrupt_lines;
            out.warnings.push_back(path.string() + ":" + std::to_string(number) + ": skipped: " + e.what());
        }
    }
    return out;
}

ArchiveWriter::ArchiveWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::app);
    if (!out_) throw Error(ErrorKind::Archive, "cannot open archive " + path.string() + " for appending");
}

void ArchiveWriter::append(const SolveRecord& record) {
    const std::string line = serialize_record(record) + '\n';
    std::lock_guard lock(mutex_);
    out_ << line;
    out_.flush();
    if (!out_) throw Error(ErrorKind::Archive, "write to " + path_.string() + " failed");
}

}  // namespace robust_lt
