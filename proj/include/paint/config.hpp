#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "paint/common.hpp"

namespace paint {

/// Resolved run configuration: plain-text "key = value" file with [section]
/// headers, overridden by command-line flags (flag > file > default). Every
/// key is validated against the schema; unknown keys are errors.
class RunConfig {
public:
    RunConfig();  // defaults only

    void load_file(const std::filesystem::path& path);
    void set(const std::string& section, const std::string& key, const std::string& value);

    std::string get_str(const std::string& section, const std::string& key) const;
    double get_num(const std::string& section, const std::string& key) const;
    int get_int(const std::string& section, const std::string& key) const;
    bool get_bool(const std::string& section, const std::string& key) const;
    std::vector<double> get_list(const std::string& section, const std::string& key) const;

    /// Fully resolved configuration, one "section.key = value" line each.
    std::string print() const;

private:
    struct Entry {
        std::string value;
        std::string help;
    };
    std::map<std::string, std::map<std::string, Entry>> values_;
    const Entry& entry(const std::string& section, const std::string& key) const;
};

}  // namespace paint
