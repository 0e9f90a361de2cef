#pragma once

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "tvr/error.hpp"
#include "tvr/image.hpp"
#include "tvr/png_io.hpp"

namespace tvr {

/// Environment variable that overrides where bridge workspaces are created.
inline constexpr const char* kBridgeTmpEnv = "TVR_TMPDIR";

namespace detail {

// Fresh private directory, removed with everything in it on destruction.
class ScratchDir {
 public:
  ScratchDir() {
    std::filesystem::path root;
    if (const char* env = std::getenv(kBridgeTmpEnv); env && *env) {
      root = env;
    } else {
      root = std::filesystem::temp_directory_path();
    }
    std::string templ = (root / "tvr-bridge-XXXXXX").string();
    std::vector<char> buf(templ.begin(), templ.end());
    buf.push_back('\0');
    if (!::mkdtemp(buf.data())) {
      throw BridgeError(concat("cannot create bridge workspace under ", root.string(), ": ",
                               std::strerror(errno)));
    }
    path_ = buf.data();
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_text(const std::filesystem::path& path, std::size_t limit = 4096) {
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.size() > limit) text = "..." + text.substr(text.size() - limit);
  return text;
}

// Runs `command "<dir>"` through /bin/sh with stdout and stderr captured in
// dir/bridge.log. Returns the raw wait status.
inline int run_shell(const std::string& command, const std::filesystem::path& dir) {
  const auto log = (dir / "bridge.log").string();
  const std::string script = command + " \"$1\"";
  const pid_t pid = ::fork();
  if (pid < 0) throw BridgeError(concat("fork failed: ", std::strerror(errno)));
  if (pid == 0) {
    const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    if (fd >= 0) {
      ::dup2(fd, STDOUT_FILENO);
      ::dup2(fd, STDERR_FILENO);
      ::close(fd);
    }
    ::execl("/bin/sh", "sh", "-c", script.c_str(), "sh", dir.c_str(),
            static_cast<char*>(nullptr));
    ::_exit(127);
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw BridgeError(concat("waitpid failed: ", std::strerror(errno)));
  }
  return status;
}

}  // namespace detail

/// File-based generator bridge. Writes cropped.png and mask.png (0/255) into a
/// fresh directory, runs `command <dir>`, and reads back generated.png, which
/// must have the input's dimensions.
inline ImageTensor run_external_generator(const ImageTensor& cropped, const Mask& mask,
                                          const std::string& command) {
  if (command.empty()) throw BridgeError("no generator command configured for the bridge");
  detail::ScratchDir workspace;
  const auto& dir = workspace.path();
  write_png(dir / "cropped.png", cropped);
  write_png(dir / "mask.png", mask);

  const int status = detail::run_shell(command, dir);
  const auto diagnostics = [&] { return detail::read_text(dir / "bridge.log"); };
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const std::string how = WIFEXITED(status)
                                ? detail::concat("exited with status ", WEXITSTATUS(status))
                                : detail::concat("terminated by signal ", WTERMSIG(status));
    throw BridgeError(detail::concat("generator command '", command, "' ", how,
                                     "; output:\n", diagnostics()));
  }
  const auto generated_path = dir / "generated.png";
  if (!std::filesystem::exists(generated_path)) {
    throw BridgeError(detail::concat("generator command '", command,
                                     "' exited 0 without writing generated.png; output:\n",
                                     diagnostics()));
  }
  Rgb8 raster;
  try {
    raster = read_rgb8(generated_path);
  } catch (const Error& e) {
    throw BridgeError(detail::concat("unreadable generated.png: ", e.what()));
  }
  if (raster.width != cropped.side() || raster.height != cropped.side()) {
    throw BridgeError(detail::concat("generated.png is ", raster.width, "x", raster.height,
                                     ", expected ", cropped.side(), "x", cropped.side()));
  }
  return to_image(raster);
}

}  // namespace tvr
