#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quim/corpus.hpp"

namespace quim {

struct UrlParts {
    std::string scheme;  // lowercased
    std::string host;    // lowercased, with port if given
    std::string path;    // path plus query, "/" when empty
};

/// Splits an absolute URL; nullopt if it has no scheme.
std::optional<UrlParts> parse_url(std::string_view url);

/// Resolves an href against the page it appeared on. Fragments are dropped
/// and dot segments removed. Returns "" for hrefs that are not http(s) or
/// file links (mailto:, javascript:, ...).
std::string resolve_url(std::string_view base, std::string_view href);

/// Saved pages under `dir` (*.html, *.htm), in path order. A page's URL is
/// its canonical link when it declares a valid one, else its file:// path.
std::vector<RawPage> load_html_dir(const std::filesystem::path& dir);

/// One URL per line; blank lines and lines starting with '#' are skipped.
std::vector<std::string> read_url_list(const std::filesystem::path& path);

struct FetchedPage {
    std::string url;  // after redirects
    std::string body;
};

class PageFetcher {
public:
    virtual ~PageFetcher() = default;
    /// nullopt for failures and non-HTML responses.
    virtual std::optional<FetchedPage> fetch(const std::string& url) const = 0;
};

struct CrawlOptions {
    std::size_t max_pages = 200;
    bool follow_links = true;  // same-host links only
    std::chrono::milliseconds delay{500};
};

/// Breadth-first from the seeds, each URL fetched at most once, stopping at
/// max_pages successful fetches. URLs that failed are appended to `failed`.
std::vector<RawPage> crawl(const std::vector<std::string>& seeds, const PageFetcher& fetcher, const CrawlOptions& opts,
                           std::vector<std::string>* failed = nullptr);

}  // namespace quim
