// Replies with theta plus one extra statistic.
#include <nlohmann/json.hpp>

#include <iostream>
#include <string>
#include <vector>

int main() {
    std::string line;
    while (std::getline(std::cin, line)) {
        auto t = nlohmann::json::parse(line).at("theta").get<std::vector<double>>();
        t.push_back(0.0);
        std::cout << nlohmann::json{{"t", t}}.dump() << std::endl;
    }
}
