#include "quim/template.hpp"

#include <functional>

#include "quim/error.hpp"

namespace quim {

namespace {

// Walks the template, handing literal text and placeholder names to callbacks.
void scan(std::string_view tmpl, const std::function<void(std::string_view)>& literal,
          const std::function<void(std::string_view)>& placeholder) {
    std::size_t i = 0;
    std::size_t lit_start = 0;
    while (i < tmpl.size()) {
        char c = tmpl[i];
        if ((c == '{' || c == '}') && i + 1 < tmpl.size() && tmpl[i + 1] == c) {
            literal(tmpl.substr(lit_start, i + 1 - lit_start));
            i += 2;
            lit_start = i;
            continue;
        }
        if (c == '}') throw Error(Errc::TemplateError, "unmatched '}' at offset " + std::to_string(i));
        if (c != '{') {
            ++i;
            continue;
        }
        literal(tmpl.substr(lit_start, i - lit_start));
        std::size_t close = tmpl.find('}', i + 1);
        if (close == std::string_view::npos) {
            throw Error(Errc::TemplateError, "unterminated placeholder at offset " + std::to_string(i));
        }
        std::string_view name = tmpl.substr(i + 1, close - i - 1);
        bool ok = !name.empty();
        for (char ch : name) ok = ok && ((ch >= 'a' && ch <= 'z') || ch == '_');
        if (!ok) throw Error(Errc::TemplateError, "malformed placeholder {" + std::string(name) + "}");
        placeholder(name);
        i = close + 1;
        lit_start = i;
    }
    literal(tmpl.substr(lit_start));
}

}  // namespace

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    scan(
        tmpl, [&](std::string_view lit) { out += lit; },
        [&](std::string_view name) {
            auto it = values.find(std::string(name));
            if (it == values.end()) throw Error(Errc::TemplateError, "unknown placeholder {" + std::string(name) + "}");
            out += it->second;
        });
    return out;
}

std::map<std::string, int> template_placeholders(std::string_view tmpl) {
    std::map<std::string, int> names;
    scan(tmpl, [](std::string_view) {}, [&](std::string_view name) { ++names[std::string(name)]; });
    return names;
}

void check_template(std::string_view tmpl, const std::set<std::string>& required,
                    const std::set<std::string>& allowed) {
    auto names = template_placeholders(tmpl);
    for (const auto& [name, count] : names) {
        if (!allowed.count(name)) throw Error(Errc::TemplateError, "unknown placeholder {" + name + "}");
    }
    for (const auto& name : required) {
        auto it = names.find(name);
        int count = it == names.end() ? 0 : it->second;
        if (count != 1) {
            throw Error(Errc::TemplateError, "placeholder {" + name + "} must appear exactly once (found " +
                                                 std::to_string(count) + ")");
        }
    }
}

}  // namespace quim
