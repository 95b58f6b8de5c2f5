#pragma once

#include <filesystem>

namespace rgpd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitNumerical = 2;

// rgpd train|eval|gradcheck|synth ...; returns the process exit code.
int run_cli(int argc, char** argv);

// Exclusive marker file in an output directory, removed on destruction.
class OutputLock {
   public:
    explicit OutputLock(const std::filesystem::path& dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

    static constexpr const char* kFileName = ".rgpd.lock";

   private:
    std::filesystem::path path_;
};

}  // namespace rgpd
