// Reference detector process for the line-delimited JSON protocol. The
// default mode answers every request from the built-in synthetic detector, so
// driving it through the process adapter must reproduce the in-process
// results exactly. The other modes misbehave in specific ways for tests:
//
//   badhello      rejects the handshake
//   short         one predicted entry missing
//   garbage       responds with a non-JSON line
//   badnum        negative face_width
//   die           exits after the handshake
//   hang          never answers the first request
//   failafter:<n> conforms for n requests, then sends garbage

#include <unistd.h>

#include <iostream>
#include <string>

#include <json.hpp>

#include "kpsearch/serialization.hpp"
#include "kpsearch/synthetic_default.hpp"

using nlohmann::json;

namespace {

json response_for(const kpsearch::SyntheticSut& sut, const kpsearch::ImageCharacteristics& ic) {
    kpsearch::GroundTruth truth = sut.render_truth(ic);
    kpsearch::Prediction pred = sut.predict(ic, truth);
    json actual = json::array();
    for (const auto& p : truth.positions) {
        if (p) {
            actual.push_back(json::array({p->x, p->y}));
        } else {
            actual.push_back(nullptr);
        }
    }
    json predicted = json::array();
    for (const auto& p : pred.positions) predicted.push_back(json::array({p.x, p.y}));
    return json{{"actual", std::move(actual)},
                {"predicted", std::move(predicted)},
                {"face_width", truth.face_width},
                {"face_height", truth.face_height}};
}

}  // namespace

int main(int argc, char** argv) {
    std::string mode = argc > 1 ? argv[1] : "synthetic";
    long fail_after = -1;
    if (mode.rfind("failafter:", 0) == 0) {
        fail_after = std::stol(mode.substr(10));
        mode = "synthetic";
    }

    kpsearch::SyntheticSut sut(kpsearch::default_synthetic_config());

    std::string line;
    if (!std::getline(std::cin, line)) return 1;
    json hello = json::parse(line, nullptr, false);
    bool hello_ok = hello.is_object() && hello.value("hello", 0) == 1 &&
                    hello.value("k", std::size_t{0}) == sut.key_point_count();
    if (mode == "badhello") {
        std::cout << json{{"ok", false}}.dump() << "\n" << std::flush;
        return 0;
    }
    std::cout << json{{"ok", hello_ok}}.dump() << "\n" << std::flush;
    if (!hello_ok) return 1;
    if (mode == "die") return 0;

    long handled = 0;
    while (std::getline(std::cin, line)) {
        if (mode == "hang") {
            pause();
            return 0;
        }
        if (mode == "garbage" || (fail_after >= 0 && handled >= fail_after)) {
            std::cout << "this is not json\n" << std::flush;
            return 0;
        }
        json request = json::parse(line, nullptr, false);
        if (request.is_discarded()) return 1;
        kpsearch::ImageCharacteristics ic = request.get<kpsearch::ImageCharacteristics>();
        json response = response_for(sut, ic);
        if (mode == "short") {
            response["predicted"].erase(response["predicted"].size() - 1);
        } else if (mode == "badnum") {
            response["face_width"] = -5.0;
        }
        std::cout << response.dump() << "\n" << std::flush;
        ++handled;
    }
    return 0;
}
