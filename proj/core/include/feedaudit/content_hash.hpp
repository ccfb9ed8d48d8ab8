#pragma once

#include <string>
#include <string_view>

namespace feedaudit {

/// Lowercase hex SHA-1 of the bytes.
std::string sha1_hex(std::string_view bytes);

/// Hash git assigns to a blob with this content ("blob <size>\0<content>").
std::string git_blob_hash(std::string_view content);

}  // namespace feedaudit
