#include "echosim/config.hpp"
#include "echosim/errors.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace echosim {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void fail_at(const std::string& src, int line, size_t col, const std::string& what) {
    std::ostringstream os;
    os << src << ":" << line << ":" << col + 1 << ": " << what;
    throw validation_error(os.str());
}

} // namespace

void config_map::set(const std::string& section, const std::string& key, const std::string& value) {
    sections_[section][key] = value;
}

bool config_map::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
}

std::string config_map::get_string(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end())
        throw validation_error(source + ": missing section [" + section + "]");
    auto jt = it->second.find(key);
    if (jt == it->second.end())
        throw validation_error(source + ": missing key '" + key + "' in section [" + section + "]");
    return jt->second;
}

double config_map::get_double(const std::string& section, const std::string& key) const {
    const std::string raw = get_string(section, key);
    size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(raw, &pos);
    } catch (const std::exception&) {
        throw validation_error(source + ": key '" + key + "' in [" + section +
                               "] is not a number: '" + raw + "'");
    }
    if (pos != raw.size())
        throw validation_error(source + ": key '" + key + "' in [" + section +
                               "] has trailing characters: '" + raw + "'");
    return v;
}

double config_map::get_double_or(const std::string& section, const std::string& key,
                                 double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

int config_map::get_int(const std::string& section, const std::string& key) const {
    const double v = get_double(section, key);
    const int n = static_cast<int>(v);
    if (static_cast<double>(n) != v)
        throw validation_error(source + ": key '" + key + "' in [" + section +
                               "] is not an integer");
    return n;
}

config_map parse_ini(std::istream& in, const std::string& source_name) {
    config_map cfg;
    cfg.source = source_name;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments that start a token (allow '#' inside values only when quoted is
        // unnecessary for our configs, so treat any unescaped '#'/';' as comment start)
        size_t cpos = line.find_first_of("#;");
        std::string body = cpos == std::string::npos ? line : line.substr(0, cpos);
        std::string t = trim(body);
        if (t.empty()) continue;
        if (t.front() == '[') {
            size_t close = t.find(']');
            if (close == std::string::npos)
                fail_at(source_name, lineno, body.find('['), "unterminated section header");
            if (close != t.size() - 1)
                fail_at(source_name, lineno, body.find(']') + 1, "text after section header");
            section = trim(t.substr(1, close - 1));
            if (section.empty())
                fail_at(source_name, lineno, body.find('['), "empty section name");
            continue;
        }
        size_t eq = body.find('=');
        if (eq == std::string::npos)
            fail_at(source_name, lineno, body.find_first_not_of(" \t"),
                    "expected 'key = value' or '[section]'");
        std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        if (key.empty())
            fail_at(source_name, lineno, eq, "empty key before '='");
        if (section.empty())
            fail_at(source_name, lineno, 0, "key '" + key + "' outside any [section]");
        if (cfg.has(section, key))
            fail_at(source_name, lineno, 0, "duplicate key '" + key + "' in [" + section + "]");
        cfg.set(section, key, value);
    }
    return cfg;
}

config_map load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw validation_error("cannot open config file '" + path + "'");
    return parse_ini(in, path);
}

std::string config_dir() {
    if (const char* env = std::getenv("ECHOSIM_CONFIG_DIR"))
        return env;
    return "configs";
}

std::string resolve_config_path(const std::string& name) {
    namespace fs = std::filesystem;
    fs::path p(name);
    if (fs::exists(p)) return p.string();
    fs::path q = fs::path(config_dir()) / name;
    if (fs::exists(q)) return q.string();
    throw validation_error("config '" + name + "' not found (looked in '.' and '" +
                           config_dir() + "')");
}

} // namespace echosim
