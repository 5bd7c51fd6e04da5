#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace decs {

// Flat `section.key = value` run configuration. Unknown keys are rejected and
// every known key has a documented default; `seed` is mandatory.
class Config {
public:
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text, const std::string& origin = "<string>");
    static const std::map<std::string, std::string>& known_keys();  // key -> default

    // `key=value`, takes precedence over file values.
    void apply_override(const std::string& assignment);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& key) const;

    uint64_t seed() const;

    // Every key with its effective value, sorted; reproduces the run exactly
    // when fed back in.
    std::string snapshot() const;

private:
    std::map<std::string, std::string> values_;
    void validate() const;
};

}  // namespace decs
