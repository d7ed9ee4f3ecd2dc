#pragma once

#include "mcpflow/frontend/ast.hpp"
#include "token.hpp"

#include <string>

namespace mcpflow::frontend {

/// Parses Python source. Syntax errors are recorded per statement in
/// Module::issues; the rest of the file is still returned.
ast::Module parse_python(const std::string &text);

/// Parses JavaScript, or TypeScript when `typescript` is set (type syntax
/// is skipped).
ast::Module parse_js(const std::string &text, bool typescript);

} // namespace mcpflow::frontend
