#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace quim::html {

/// Visible text of an HTML page. Elements that carry page chrome or code
/// (head, header, footer, nav, aside, script, style, noscript, template) are
/// dropped with their content; block-level boundaries become spaces; entities
/// are decoded; whitespace is collapsed to single spaces.
std::string visible_text(std::string_view markup);

/// Contents of the first <title> element, whitespace-collapsed ("" if none).
std::string title(std::string_view markup);

/// href of <link rel="canonical">, or "" if absent.
std::string canonical_url(std::string_view markup);

/// Raw href values of <a> elements in document order.
std::vector<std::string> links(std::string_view markup);

/// Decodes the common named entities and numeric character references.
/// Unknown entities are left as-is.
std::string decode_entities(std::string_view s);

}  // namespace quim::html
