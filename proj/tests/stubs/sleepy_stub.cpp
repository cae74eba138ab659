// Echo stub that stalls on its first request if the marker file named by
// SLEEPY_STUB_MARKER does not exist yet; it creates the marker first, so the
// restarted child answers promptly.
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

int main() {
    const char* marker = std::getenv("SLEEPY_STUB_MARKER");
    bool stall = false;
    if (marker && !std::ifstream(marker)) {
        std::ofstream(marker) << "stalled\n";
        stall = true;
    }
    std::string line;
    while (std::getline(std::cin, line)) {
        if (stall) std::this_thread::sleep_for(std::chrono::seconds(30));
        const auto req = nlohmann::json::parse(line);
        std::cout << nlohmann::json{{"t", req.at("theta")}}.dump() << std::endl;
    }
}
