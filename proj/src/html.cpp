#include "quim/html.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>

#include "quim/text.hpp"

namespace quim::html {

namespace {

enum class Kind { Text, Start, End };

struct Event {
    Kind kind = Kind::Text;
    std::string_view text;   // Text payload
    std::string name;        // lowercased tag name
    std::string_view attrs;  // raw attribute section of a start tag
    bool self_closing = false;
};

constexpr std::array<std::string_view, 9> kDropped = {
    "head", "header", "footer", "nav", "aside", "script", "style", "noscript", "template",
};

constexpr std::array<std::string_view, 44> kBlock = {
    "address", "article", "blockquote", "body", "br", "caption", "dd", "details", "dialog",
    "div", "dl", "dt", "fieldset", "figcaption", "figure", "form", "h1", "h2", "h3", "h4",
    "h5", "h6", "hr", "html", "li", "main", "ol", "option", "p", "pre", "section", "summary",
    "table", "tbody", "td", "tfoot", "th", "thead", "title", "tr", "ul", "select", "textarea",
    "label",
};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& set, std::string_view v) {
    return std::find(set.begin(), set.end(), v) != set.end();
}

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

bool is_name_char(char c) {
    return is_alpha(c) || (c >= '0' && c <= '9') || c == '-' || c == ':' || c == '_';
}

std::size_t ifind(std::string_view hay, std::string_view needle, std::size_t from) {
    if (needle.size() > hay.size()) return std::string_view::npos;
    for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
        if (iequals(hay.substr(i, needle.size()), needle)) return i;
    }
    return std::string_view::npos;
}

class Scanner {
public:
    explicit Scanner(std::string_view src) : src_(src) {}

    std::optional<Event> next() {
        while (pos_ < src_.size()) {
            if (!raw_end_.empty()) return raw_text();
            if (src_[pos_] != '<' || !looks_like_markup(pos_)) return text();
            if (src_.compare(pos_, 4, "<!--") == 0) {
                auto end = src_.find("-->", pos_ + 4);
                pos_ = end == std::string_view::npos ? src_.size() : end + 3;
                continue;
            }
            if (src_[pos_ + 1] == '!' || src_[pos_ + 1] == '?') {
                auto end = src_.find('>', pos_);
                pos_ = end == std::string_view::npos ? src_.size() : end + 1;
                continue;
            }
            return tag();
        }
        return std::nullopt;
    }

private:
    bool looks_like_markup(std::size_t at) const {
        if (at + 1 >= src_.size()) return false;
        char c = src_[at + 1];
        return is_alpha(c) || c == '/' || c == '!' || c == '?';
    }

    Event text() {
        std::size_t start = pos_;
        ++pos_;
        while (pos_ < src_.size() && !(src_[pos_] == '<' && looks_like_markup(pos_))) ++pos_;
        return Event{Kind::Text, src_.substr(start, pos_ - start), {}, {}, false};
    }

    // Body of <script>/<style>: everything up to the matching close tag.
    Event raw_text() {
        std::size_t end = ifind(src_, raw_end_, pos_);
        std::size_t stop = end == std::string_view::npos ? src_.size() : end;
        Event ev{Kind::Text, src_.substr(pos_, stop - pos_), {}, {}, false};
        pos_ = stop;
        raw_end_.clear();
        return ev;
    }

    Event tag() {
        std::size_t i = pos_ + 1;
        bool closing = false;
        if (src_[i] == '/') {
            closing = true;
            ++i;
        }
        std::size_t name_start = i;
        while (i < src_.size() && is_name_char(src_[i])) ++i;
        std::string name = to_lower(src_.substr(name_start, i - name_start));
        std::size_t attrs_start = i;
        char quote = 0;
        while (i < src_.size()) {
            char c = src_[i];
            if (quote) {
                if (c == quote) quote = 0;
            } else if (c == '"' || c == '\'') {
                quote = c;
            } else if (c == '>') {
                break;
            }
            ++i;
        }
        std::size_t attrs_end = i;
        pos_ = i < src_.size() ? i + 1 : src_.size();

        Event ev;
        ev.kind = closing ? Kind::End : Kind::Start;
        ev.name = std::move(name);
        ev.attrs = src_.substr(attrs_start, attrs_end - attrs_start);
        ev.self_closing = !ev.attrs.empty() && ev.attrs.back() == '/';
        if (ev.kind == Kind::Start && !ev.self_closing && (ev.name == "script" || ev.name == "style")) {
            raw_end_ = "</" + ev.name;
        }
        return ev;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::string raw_end_;
};

/// Value of attribute `key` inside a raw attribute section.
std::optional<std::string> attribute(std::string_view attrs, std::string_view key) {
    std::size_t i = 0;
    while (i < attrs.size()) {
        while (i < attrs.size() && (is_space(attrs[i]) || attrs[i] == '/')) ++i;
        std::size_t ks = i;
        while (i < attrs.size() && !is_space(attrs[i]) && attrs[i] != '=' && attrs[i] != '/') ++i;
        std::string_view k = attrs.substr(ks, i - ks);
        while (i < attrs.size() && is_space(attrs[i])) ++i;
        std::string_view v;
        if (i < attrs.size() && attrs[i] == '=') {
            ++i;
            while (i < attrs.size() && is_space(attrs[i])) ++i;
            if (i < attrs.size() && (attrs[i] == '"' || attrs[i] == '\'')) {
                char q = attrs[i++];
                std::size_t vs = i;
                while (i < attrs.size() && attrs[i] != q) ++i;
                v = attrs.substr(vs, i - vs);
                if (i < attrs.size()) ++i;
            } else {
                std::size_t vs = i;
                while (i < attrs.size() && !is_space(attrs[i])) ++i;
                v = attrs.substr(vs, i - vs);
            }
        }
        if (k.empty()) {
            if (i < attrs.size()) ++i;
            continue;
        }
        if (iequals(k, key)) return decode_entities(v);
    }
    return std::nullopt;
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

struct NamedEntity {
    std::string_view name;
    std::uint32_t cp;
};

constexpr std::array<NamedEntity, 18> kEntities = {{
    {"amp", '&'},      {"lt", '<'},       {"gt", '>'},        {"quot", '"'},
    {"apos", '\''},    {"nbsp", ' '},     {"copy", 0xA9},     {"reg", 0xAE},
    {"mdash", 0x2014}, {"ndash", 0x2013}, {"hellip", 0x2026}, {"rsquo", 0x2019},
    {"lsquo", 0x2018}, {"ldquo", 0x201C}, {"rdquo", 0x201D},  {"bull", 0x2022},
    {"middot", 0xB7},  {"trade", 0x2122},
}};

}  // namespace

std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        std::size_t semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back(s[i++]);
            continue;
        }
        std::string_view body = s.substr(i + 1, semi - i - 1);
        bool done = false;
        if (!body.empty() && body[0] == '#') {
            bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
            std::string_view digits = body.substr(hex ? 2 : 1);
            std::uint32_t cp = 0;
            bool ok = !digits.empty();
            for (char c : digits) {
                int d = -1;
                if (c >= '0' && c <= '9') d = c - '0';
                else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
                else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
                if (d < 0 || cp > 0x10FFFF) {
                    ok = false;
                    break;
                }
                cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
            }
            if (ok) {
                append_utf8(out, cp == 0xA0 ? ' ' : cp);
                done = true;
            }
        } else {
            for (const auto& e : kEntities) {
                if (body == e.name) {
                    append_utf8(out, e.cp);
                    done = true;
                    break;
                }
            }
        }
        if (done) {
            i = semi + 1;
        } else {
            out.push_back(s[i++]);
        }
    }
    return out;
}

std::string visible_text(std::string_view markup) {
    Scanner scanner(markup);
    std::string buf;
    std::vector<std::string> dropped;  // stack of open dropped elements
    while (auto ev = scanner.next()) {
        switch (ev->kind) {
            case Kind::Text:
                if (dropped.empty()) buf += decode_entities(ev->text);
                break;
            case Kind::Start:
                if (ev->name == "body" && !dropped.empty() && dropped.front() == "head") {
                    dropped.clear();  // unterminated <head>
                }
                if (contains(kDropped, ev->name)) {
                    if (!ev->self_closing) dropped.push_back(ev->name);
                } else if (dropped.empty() && contains(kBlock, ev->name)) {
                    buf.push_back('\n');
                }
                break;
            case Kind::End:
                if (!dropped.empty()) {
                    auto it = std::find(dropped.rbegin(), dropped.rend(), ev->name);
                    if (it != dropped.rend()) dropped.erase(std::next(it).base(), dropped.end());
                } else if (contains(kBlock, ev->name)) {
                    buf.push_back('\n');
                }
                break;
        }
    }
    return collapse_whitespace(buf);
}

std::string title(std::string_view markup) {
    Scanner scanner(markup);
    bool in_title = false;
    std::string buf;
    while (auto ev = scanner.next()) {
        if (ev->kind == Kind::Start && ev->name == "title") {
            in_title = true;
        } else if (ev->kind == Kind::End && ev->name == "title") {
            break;
        } else if (in_title && ev->kind == Kind::Text) {
            buf += decode_entities(ev->text);
        }
    }
    return collapse_whitespace(buf);
}

std::string canonical_url(std::string_view markup) {
    Scanner scanner(markup);
    while (auto ev = scanner.next()) {
        if (ev->kind != Kind::Start || ev->name != "link") continue;
        auto rel = attribute(ev->attrs, "rel");
        if (!rel || !iequals(trim(*rel), "canonical")) continue;
        if (auto href = attribute(ev->attrs, "href")) return std::string(trim(*href));
    }
    return {};
}

std::vector<std::string> links(std::string_view markup) {
    std::vector<std::string> out;
    Scanner scanner(markup);
    while (auto ev = scanner.next()) {
        if (ev->kind != Kind::Start || ev->name != "a") continue;
        if (auto href = attribute(ev->attrs, "href")) {
            auto t = trim(*href);
            if (!t.empty()) out.emplace_back(t);
        }
    }
    return out;
}

}  // namespace quim::html
