#include "quim/ingest.hpp"

#include <algorithm>
#include <deque>
#include <regex>
#include <set>
#include <thread>

#include "quim/error.hpp"
#include "quim/html.hpp"
#include "quim/jsonl.hpp"
#include "quim/qindex.hpp"
#include "quim/text.hpp"

namespace quim {

namespace fs = std::filesystem;

namespace {

const std::regex& scheme_re() {
    static const std::regex re(R"(^([A-Za-z][A-Za-z0-9+.\-]*):)");
    return re;
}

std::string remove_dot_segments(std::string_view path) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    const bool absolute = !path.empty() && path.front() == '/';
    while (pos <= path.size()) {
        auto slash = path.find('/', pos);
        if (slash == std::string_view::npos) slash = path.size();
        const std::string seg(path.substr(pos, slash - pos));
        const bool last = slash == path.size();
        if (seg == "..") {
            if (!out.empty()) out.pop_back();
            if (last) out.emplace_back();
        } else if (seg == ".") {
            if (last) out.emplace_back();
        } else if (!seg.empty() || last) {
            out.push_back(seg);
        }
        pos = slash + 1;
    }
    std::string joined = absolute ? "/" : "";
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (i) joined += "/";
        joined += out[i];
    }
    return joined.empty() ? "/" : joined;
}

std::string normalize_path(std::string_view path_and_query) {
    const auto q = path_and_query.find('?');
    const auto path = path_and_query.substr(0, q);
    std::string out = remove_dot_segments(path.empty() ? "/" : path);
    if (q != std::string_view::npos) out += path_and_query.substr(q);
    return out;
}

std::string strip_fragment(std::string_view s) { return std::string(s.substr(0, s.find('#'))); }

}  // namespace

std::optional<UrlParts> parse_url(std::string_view url) {
    static const std::regex re(R"(^([A-Za-z][A-Za-z0-9+.\-]*)://([^/?#]*)([^#]*))");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(url.begin(), url.end(), m, re)) return std::nullopt;
    UrlParts p{to_lower(m[1].str()), to_lower(m[2].str()), m[3].str()};
    if (p.path.empty() || p.path.front() != '/') p.path = "/" + p.path;
    return p;
}

std::string resolve_url(std::string_view base, std::string_view href) {
    const std::string h = strip_fragment(trim(href));
    std::match_results<std::string::const_iterator> m;
    if (std::regex_search(h.begin(), h.end(), m, scheme_re())) {
        const auto scheme = to_lower(m[1].str());
        if (scheme != "http" && scheme != "https" && scheme != "file") return "";
        auto p = parse_url(h);
        return p ? p->scheme + "://" + p->host + normalize_path(p->path) : "";
    }
    const auto b = parse_url(base);
    if (!b) return "";
    const std::string origin = b->scheme + "://" + b->host;
    if (h.empty()) return origin + b->path;
    if (h.rfind("//", 0) == 0) return resolve_url(base, b->scheme + ":" + h);
    if (h.front() == '/') return origin + normalize_path(h);
    const std::string base_path = b->path.substr(0, b->path.find('?'));
    if (h.front() == '?') return origin + base_path + h;
    const std::string dir = base_path.substr(0, base_path.rfind('/') + 1);
    return origin + normalize_path(dir + h);
}

std::vector<RawPage> load_html_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(Errc::IoError, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto ext = to_lower(e.path().extension().string());
        if (ext == ".html" || ext == ".htm") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<RawPage> pages;
    for (const auto& f : files) {
        RawPage p;
        p.html = read_file(f);
        p.title = html::title(p.html);
        const auto canon = html::canonical_url(p.html);
        p.url = is_valid_url(canon) ? canon : "file://" + fs::absolute(f).lexically_normal().generic_string();
        pages.push_back(std::move(p));
    }
    return pages;
}

std::vector<std::string> read_url_list(const fs::path& path) {
    std::vector<std::string> urls;
    const std::string text = read_file(path);
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        const auto line = trim(std::string_view(text).substr(pos, nl - pos));
        pos = nl + 1;
        if (line.empty() || line.front() == '#') continue;
        urls.emplace_back(line);
    }
    return urls;
}

std::vector<RawPage> crawl(const std::vector<std::string>& seeds, const PageFetcher& fetcher, const CrawlOptions& opts,
                           std::vector<std::string>* failed) {
    std::set<std::string> hosts;
    std::set<std::string> seen;
    std::set<std::string> stored;  // final URLs of pages kept
    std::deque<std::string> frontier;
    for (const auto& s : seeds) {
        const auto u = resolve_url(s, "");
        if (u.empty() || !is_valid_url(u)) throw Error(Errc::MalformedUrl, "bad seed URL: " + s);
        hosts.insert(parse_url(u)->host);
        if (seen.insert(u).second) frontier.push_back(u);
    }

    std::vector<RawPage> pages;
    bool first = true;
    while (!frontier.empty() && pages.size() < opts.max_pages) {
        const std::string url = frontier.front();
        frontier.pop_front();
        if (!first && opts.delay.count() > 0) std::this_thread::sleep_for(opts.delay);
        first = false;

        auto got = fetcher.fetch(url);
        if (!got) {
            if (failed) failed->push_back(url);
            continue;
        }
        RawPage p;
        p.url = got->url.empty() ? url : got->url;
        if (!stored.insert(p.url).second) continue;
        seen.insert(p.url);
        p.html = std::move(got->body);
        p.title = html::title(p.html);
        p.fetched_at = build_timestamp();
        if (opts.follow_links) {
            for (const auto& href : html::links(p.html)) {
                const auto next = resolve_url(p.url, href);
                if (next.empty() || !hosts.count(parse_url(next)->host)) continue;
                if (seen.insert(next).second) frontier.push_back(next);
            }
        }
        pages.push_back(std::move(p));
    }
    return pages;
}

}  // namespace quim
