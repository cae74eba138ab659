// Out-of-process copy of the built-in logit model. The design is rebuilt from
// the dataset key in LOGIT_STUB_DATA_KEY, exactly as the in-process dataset.
#include "ifit/models/logit.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

int main() {
    const char* key = std::getenv("LOGIT_STUB_DATA_KEY");
    if (!key) {
        std::cerr << "LOGIT_STUB_DATA_KEY is not set\n";
        return 2;
    }
    auto design_rng = ifit::RngStream(std::strtoull(key, nullptr, 10)).child(0);
    const ifit::models::LogitSimulator sim(ifit::models::LogitSimulator::make_design(design_rng));
    std::string line;
    while (std::getline(std::cin, line)) {
        const auto req = nlohmann::json::parse(line);
        const auto theta = req.at("theta").get<std::vector<double>>();
        const ifit::Vector th = Eigen::Map<const ifit::Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
        const ifit::Vector t = sim.simulate(th, ifit::RngStream(req.at("seed").get<std::uint64_t>()));
        std::cout << nlohmann::json{{"t", std::vector<double>(t.data(), t.data() + t.size())}}.dump() << std::endl;
    }
}
