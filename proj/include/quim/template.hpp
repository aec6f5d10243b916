#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

namespace quim {

/// Single-pass substitution of {name} placeholders. "{{" and "}}" produce
/// literal braces. Substituted values are not re-scanned.
///
/// Throws TemplateError on an unterminated or unknown placeholder.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// Placeholder name -> number of occurrences.
std::map<std::string, int> template_placeholders(std::string_view tmpl);

/// Throws TemplateError unless every name in `required` occurs exactly once
/// and no name outside `allowed` occurs.
void check_template(std::string_view tmpl, const std::set<std::string>& required,
                    const std::set<std::string>& allowed);

}  // namespace quim
