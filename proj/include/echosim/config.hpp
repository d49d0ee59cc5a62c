#ifndef ECHOSIM_CONFIG_HPP
#define ECHOSIM_CONFIG_HPP

#include <istream>
#include <map>
#include <string>

namespace echosim {

// Minimal INI-style configuration: [section] headers, key = value lines,
// '#' or ';' comments, blank lines ignored.  Parse errors carry
// file:line:column and the offending text.
class config_map {
public:
    void set(const std::string& section, const std::string& key, const std::string& value);

    bool has(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key) const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return sections_;
    }

    // Name reported in diagnostics ("<stream>" if parsed from memory).
    std::string source;

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

config_map parse_ini(std::istream& in, const std::string& source_name);
config_map load_config_file(const std::string& path);

// Directory searched for named configs: $ECHOSIM_CONFIG_DIR if set,
// otherwise ./configs.
std::string config_dir();

// config_dir() + "/" + name; validates existence.
std::string resolve_config_path(const std::string& name);

} // namespace echosim

#endif
