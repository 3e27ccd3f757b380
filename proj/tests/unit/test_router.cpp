#include <algorithm>
#include <chrono>
#include <memory>
#include <numeric>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "detdsci/encoding.hpp"
#include "detdsci/image_codec.hpp"
#include "detdsci/router.hpp"
#include "reference_values.hpp"
#include "stub_server.hpp"

using namespace detdsci;
using namespace detdsci::router;
namespace t = detdsci::testing;
using geo::ScaleInterval;
using nlohmann::json;

namespace {

ingest::Crop crop_at(int zoom, bool with_pixels = false)
{
    const geo::ZoomLevel z(zoom);
    const geo::TileCoord origin{z, 0, 0};
    std::shared_ptr<Raster> pixels;
    if (with_pixels) {
        pixels = std::make_shared<Raster>(ingest::kCropSize, ingest::kCropSize);
        pixels->fill(10, 20, 30);
    }
    return {ingest::crop_id(origin, 0, 0), z, origin, 0, 0, ingest::kCropSize, ingest::kCropSize, pixels};
}

ConfusionMatrix two_way()
{
    return {{"LARGE", "SMALL"}, t::kTwoWayConfusion};
}

ConfusionMatrix ten_way()
{
    std::vector<std::string> labels;
    for (int z = 14; z <= 23; ++z) {
        labels.push_back(std::to_string(z));
    }
    return {labels, t::kTenWayConfusion};
}

}  // namespace

TEST(ClassifyScale, OracleFollowsTheZoomIntervals)
{
    const auto oracle = ClassifierBackendRef::oracle();
    for (int z = 14; z <= 23; ++z) {
        const auto d = classify_scale(crop_at(z), oracle);
        EXPECT_EQ(d.interval, geo::interval_for_zoom(geo::ZoomLevel(z))) << z;
        EXPECT_EQ(d.interval, z <= 17 ? ScaleInterval::Large : ScaleInterval::Small) << z;
        EXPECT_EQ(d.detector_id, z <= 17 ? kLargeDetectorId : kSmallDetectorId) << z;
        EXPECT_EQ(d.confidence, 1.0);
    }
    EXPECT_THROW((void)classify_scale(crop_at(12), oracle), RoutingError);
}

TEST(ClassifyScale, StubAnswersItsConstant)
{
    for (const int z : {14, 16, 19, 23}) {
        const auto d = classify_scale(crop_at(z), ClassifierBackendRef::stub(ScaleInterval::Small));
        EXPECT_EQ(d.interval, ScaleInterval::Small);
        EXPECT_EQ(d.confidence, 1.0);
        EXPECT_EQ(d.detector_id, "CI-SS_Det_stable");
    }
}

TEST(ClassifyScale, RejectsWrongCropSize)
{
    auto c = crop_at(16);
    c.pixels = std::make_shared<Raster>(256, 256);
    EXPECT_THROW((void)classify_scale(c, ClassifierBackendRef::oracle()), RoutingError);
}

TEST(BackendRef, EndpointPresentIffRemote)
{
    EXPECT_NO_THROW(ClassifierBackendRef::oracle().validate());
    EXPECT_NO_THROW(ClassifierBackendRef::remote("http://h:1").validate());
    EXPECT_THROW(ClassifierBackendRef::remote("").validate(), ConfigError);
    auto oracle_with_url = ClassifierBackendRef::oracle();
    oracle_with_url.endpoint = "http://h:1";
    EXPECT_THROW(oracle_with_url.validate(), ConfigError);
    ClassifierBackendRef stub_without_answer;
    stub_without_answer.kind = ClassifierKind::FixedStub;
    EXPECT_THROW(stub_without_answer.validate(), ConfigError);
    EXPECT_EQ(parse_classifier_kind("REMOTE_SERVICE"), ClassifierKind::RemoteService);
    EXPECT_THROW((void)parse_classifier_kind("remote"), ConfigError);
}

TEST(RemoteClassifier, SpeaksTheWireProtocol)
{
    std::string seen_path;
    int seen_width = 0;
    t::StubServer server([&](httplib::Server& s) {
        s.Post(kClassifyPath, [&](const httplib::Request& req, httplib::Response& res) {
            seen_path = req.path;
            const auto doc = json::parse(req.body);
            seen_width = decode_image(base64_decode(doc.at("image").get<std::string>())).width();
            res.set_content(R"({"interval": "LARGE", "confidence": 0.87})", "application/json");
        });
    });
    DefaultHttpTransport transport(std::chrono::seconds(10));
    const auto d = classify_scale(crop_at(20, true), ClassifierBackendRef::remote(server.base_url()), &transport);
    EXPECT_EQ(d.interval, ScaleInterval::Large);
    EXPECT_DOUBLE_EQ(d.confidence, 0.87);
    EXPECT_EQ(d.detector_id, kLargeDetectorId);
    EXPECT_EQ(seen_path, kClassifyPath);
    EXPECT_EQ(seen_width, ingest::kCropSize);
}

TEST(RemoteClassifier, ProtocolViolationsAreRoutingErrors)
{
    std::string answer;
    int status = 200;
    t::StubServer server([&](httplib::Server& s) {
        s.Post(kClassifyPath, [&](const httplib::Request&, httplib::Response& res) {
            res.status = status;
            res.set_content(answer, "application/json");
        });
    });
    DefaultHttpTransport transport(std::chrono::seconds(10));
    const auto backend = ClassifierBackendRef::remote(server.base_url());
    const auto crop = crop_at(18, true);

    for (const char* bad : {"not json", R"({"interval": "MEDIUM", "confidence": 0.5})",
                            R"({"interval": "SMALL"})", R"({"interval": "SMALL", "confidence": 1.5})"}) {
        answer = bad;
        EXPECT_THROW((void)classify_scale(crop, backend, &transport), RoutingError) << bad;
    }
    status = 500;
    answer = R"({"interval": "SMALL", "confidence": 0.5})";
    EXPECT_THROW((void)classify_scale(crop, backend, &transport), RoutingError);
    EXPECT_THROW((void)classify_scale(crop, backend, nullptr), RoutingError);
}

TEST(RemoteClassifier, UnreachableServiceIsARoutingError)
{
    std::string url;
    {
        t::StubServer gone([](httplib::Server&) {});
        url = gone.base_url();
    }
    DefaultHttpTransport transport(std::chrono::seconds(2));
    EXPECT_THROW((void)classify_scale(crop_at(18, true), ClassifierBackendRef::remote(url), &transport),
                 RoutingError);
}

TEST(Accuracy, TwoWayMatrix)
{
    const auto cm = two_way();
    EXPECT_EQ(cm.trace(), 1100u);
    EXPECT_EQ(cm.total(), 1136u);
    EXPECT_DOUBLE_EQ(accuracy(cm), 1100.0 / 1136.0);
    EXPECT_NEAR(accuracy(cm) * 100.0, t::kTwoWayAccuracyPct, 0.005);
}

TEST(Accuracy, TenWayMatrixSumsItsReferenceDiagonal)
{
    const auto cm = ten_way();
    EXPECT_EQ(cm.trace(), 775u);
    EXPECT_EQ(cm.total(), 1136u);
    EXPECT_NEAR(accuracy(cm) * 100.0, 68.22, 0.005);
    // The reference figure would need one more correct prediction.
    EXPECT_NEAR(776.0 / 1136.0 * 100.0, t::kTenWayReferenceAccuracyPct, 0.005);
}

TEST(Accuracy, IdentityAndDegenerateMatrices)
{
    EXPECT_EQ(accuracy({{"a", "b", "c"}, {{5, 0, 0}, {0, 1, 0}, {0, 0, 9}}}), 1.0);
    EXPECT_THROW((void)accuracy({{"a", "b"}, {{0, 0}, {0, 0}}}), std::domain_error);
    EXPECT_THROW((void)accuracy({{"a", "b"}, {{1, 0}}}), std::invalid_argument);
    EXPECT_THROW((void)accuracy({{"a", "b"}, {{1, 0}, {0}}}), std::invalid_argument);
}

TEST(Accuracy, InvariantUnderSimultaneousPermutation)
{
    const auto cm = ten_way();
    std::mt19937 rng(99);
    std::vector<std::size_t> perm(cm.labels.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(perm.begin(), perm.end(), rng);
        ConfusionMatrix p{cm.labels, cm.counts};
        for (std::size_t i = 0; i < perm.size(); ++i) {
            p.labels[i] = cm.labels[perm[i]];
            for (std::size_t j = 0; j < perm.size(); ++j) {
                p.counts[i][j] = cm.counts[perm[i]][perm[j]];
            }
        }
        EXPECT_EQ(accuracy(p), accuracy(cm));
    }
}
