#include <atomic>
#include <chrono>
#include <filesystem>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "elseg/error.hpp"
#include "elseg/imagecore.hpp"
#include "elseg/review.hpp"

namespace elseg::review {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

annotate::Polygon square(double x, double y, double s) {
    return geometry::make_polygon({{x, y}, {x + s, y}, {x + s, y + s}, {x, y + s}});
}

class StoreTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("elseg_review_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_ / "src");
        Image img(32, 24);
        for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<double>(i % 256);
        image_ = dir_ / "src" / "cell.png";
        save_png(img, image_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    AnnotationRecord rec(const std::string& id, std::vector<annotate::Polygon> polys = {}) const {
        AnnotationRecord r;
        r.image_id = id;
        r.source_path = image_.string();
        r.width = 32;
        r.height = 24;
        r.polygons = std::move(polys);
        return r;
    }

    fs::path dir_, image_;
};

TEST_F(StoreTest, AddGetAndDecide) {
    ReviewStore s(dir_ / "store");
    EXPECT_TRUE(s.list().empty());
    s.add(rec("a", {square(2, 2, 4)}), image_);
    EXPECT_THROW(s.add(rec("a"), image_), ConflictError);
    EXPECT_THROW(s.add(rec("../x"), image_), ArgumentError);
    EXPECT_THROW(s.add(rec("big", {square(30, 2, 4)}), image_), ValidationError);
    auto r = s.get("a");
    EXPECT_EQ(r.status, Status::silver);
    EXPECT_EQ(r.version, 1);
    EXPECT_TRUE(fs::exists(s.image_path("a")));

    const auto g = s.record_decision("a", {Status::gold, 1, std::nullopt, std::nullopt});
    EXPECT_EQ(g.status, Status::gold);
    EXPECT_EQ(g.version, 2);
    EXPECT_EQ(g.polygons, r.polygons);
    EXPECT_THROW(s.record_decision("a", {Status::gold, 1, std::nullopt, std::nullopt}), ConflictError);
    EXPECT_THROW(s.record_decision("a", {Status::rejected, 2, std::nullopt, std::nullopt}), ValidationError);
    EXPECT_THROW(s.record_decision("zz", {Status::gold, 1, std::nullopt, std::nullopt}), NotFoundError);
    EXPECT_EQ(s.get("a").version, 2);
}

TEST_F(StoreTest, RejectRetainsPolygons) {
    ReviewStore s(dir_ / "store");
    s.add(rec("b", {square(1, 1, 3), square(10, 10, 2)}), image_);
    const auto r = s.record_decision("b", {Status::rejected, 1, std::nullopt, std::string("false positive")});
    EXPECT_EQ(r.status, Status::rejected);
    EXPECT_EQ(r.polygons.size(), 2u);
    EXPECT_EQ(r.note, "false positive");
}

TEST_F(StoreTest, ReloadReproducesIndexAndAuditReplays) {
    std::map<std::string, AnnotationRecord> before;
    {
        ReviewStore s(dir_ / "store");
        for (int i = 0; i < 4; ++i) s.add(rec("r" + std::to_string(i), {square(i, i, 3.25)}), image_);
        s.record_decision("r1", {Status::gold, 1, std::vector{square(5, 5, 1.5)}, std::nullopt});
        s.record_decision("r1", {Status::gold, 2, std::nullopt, std::string("again")});
        s.record_decision("r2", {Status::rejected, 1, std::nullopt, std::nullopt});
        before = s.snapshot();
        EXPECT_EQ(replay(s.audit()), before);
    }
    ReviewStore again(dir_ / "store");
    EXPECT_EQ(again.snapshot(), before);
    EXPECT_EQ(replay(again.audit()), before);
    const auto log = again.audit();
    ASSERT_EQ(log.size(), 7u);
    for (std::size_t i = 1; i < log.size(); ++i) {
        EXPECT_EQ(log[i].seq, log[i - 1].seq + 1);
        EXPECT_GE(log[i].time_ms, log[i - 1].time_ms);
    }
    // No temp files left behind.
    for (const auto& f : fs::recursive_directory_iterator(dir_ / "store"))
        EXPECT_EQ(f.path().string().find(".tmp"), std::string::npos) << f.path();
}

TEST_F(StoreTest, VersionsIncreaseUnderConcurrentWriters) {
    ReviewStore s(dir_ / "store");
    s.add(rec("c"), image_);
    s.record_decision("c", {Status::gold, 1, std::nullopt, std::nullopt});
    std::atomic<int> wins{0}, conflicts{0};
    std::vector<std::thread> ts;
    for (int t = 0; t < 8; ++t) {
        ts.emplace_back([&] {
            for (int k = 0; k < 20; ++k) {
                const long v = s.get("c").version;
                try {
                    s.record_decision("c", {Status::gold, v, std::nullopt, std::nullopt});
                    ++wins;
                } catch (const ConflictError&) {
                    ++conflicts;
                }
            }
        });
    }
    for (auto& t : ts) t.join();
    EXPECT_EQ(wins + conflicts, 160);
    // Every success bumped the version by exactly one: nothing was lost.
    EXPECT_EQ(s.get("c").version, 2 + wins.load());
}

class ServiceTest : public StoreTest {
protected:
    void SetUp() override {
        StoreTest::SetUp();
        store_ = std::make_unique<ReviewStore>(dir_ / "store");
        ServerOptions opt;
        opt.port = 0;
        opt.t_inference = 2.237;
        opt.t_tuning = 1950;
        server_ = std::make_unique<Server>(*store_, opt);
        server_->start();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", server_->port());
    }
    void TearDown() override {
        server_->stop();
        StoreTest::TearDown();
    }

    httplib::Result put(const std::string& id, const json& body) {
        return client_->Put("/api/annotations/" + id, body.dump(), "application/json");
    }

    std::unique_ptr<ReviewStore> store_;
    std::unique_ptr<Server> server_;
    std::unique_ptr<httplib::Client> client_;
};

TEST_F(ServiceTest, EmptyStoreListsNothing) {
    const auto r = client_->Get("/api/images");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    EXPECT_EQ(json::parse(r->body), json::array());
}

TEST_F(ServiceTest, ScriptedSession) {
    store_->add(rec("a", {square(2, 2, 4)}), image_);
    store_->add(rec("b", {square(8, 8, 2)}), image_);

    auto list = json::parse(client_->Get("/api/images")->body);
    ASSERT_EQ(list.size(), 2u);
    EXPECT_EQ(list[0]["id"], "a");
    EXPECT_EQ(list[0]["status"], "silver");
    EXPECT_EQ(list[0]["thumbnail_url"], "/api/images/a");

    const auto png = client_->Get("/api/images/a");
    EXPECT_EQ(png->status, 200);
    EXPECT_EQ(png->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(png->body.substr(1, 3), "PNG");

    // Read, edit, read back.
    auto got = json::parse(client_->Get("/api/annotations/a")->body);
    EXPECT_EQ(got["version"], 1);
    const json edited = json::array({json::array({{3, 3}, {9, 3}, {9, 7}, {3, 7}})});
    auto r = put("a", {{"decision", "gold"}, {"expected_version", 1}, {"polygons", edited}});
    ASSERT_EQ(r->status, 200) << r->body;
    got = json::parse(client_->Get("/api/annotations/a")->body);
    EXPECT_EQ(got["status"], "gold");
    EXPECT_EQ(got["version"], 2);
    EXPECT_EQ(got["polygons"], edited);

    // Stale version.
    r = put("a", {{"decision", "gold"}, {"expected_version", 1}});
    EXPECT_EQ(r->status, 409);
    auto err = json::parse(r->body);
    EXPECT_EQ(err["code"], "conflict");
    EXPECT_EQ(err["current_version"], 2);
    EXPECT_TRUE(err.contains("message"));

    // Reject, unknown, malformed, forbidden transition, bad geometry.
    EXPECT_EQ(put("b", {{"decision", "rejected"}, {"expected_version", 1}})->status, 200);
    EXPECT_EQ(put("b", {{"decision", "gold"}, {"expected_version", 2}})->status, 422);
    EXPECT_EQ(put("nope", {{"decision", "gold"}, {"expected_version", 1}})->status, 404);
    EXPECT_EQ(json::parse(client_->Get("/api/annotations/nope")->body)["code"], "not_found");
    EXPECT_EQ(client_->Put("/api/annotations/a", "{not json", "application/json")->status, 400);
    EXPECT_EQ(put("a", {{"decision", "silver"}, {"expected_version", 2}})->status, 400);
    EXPECT_EQ(put("a", {{"decision", "gold"}, {"expected_version", 2},
                        {"polygons", json::array({json::array({{0, 0}, {99, 0}, {0, 5}})})}})
                  ->status,
              422);
    EXPECT_EQ(client_->Get("/api/unknown")->status, 404);

    // Export carries gold only.
    const auto coco = json::parse(client_->Get("/api/export/coco")->body);
    ASSERT_EQ(coco["images"].size(), 1u);
    EXPECT_EQ(coco["images"][0]["elseg_image_id"], "a");
    EXPECT_EQ(coco["annotations"].size(), 1u);
    EXPECT_EQ(client_->Get("/api/export/coco")->body, client_->Get("/api/export/coco")->body);

    const auto stats = json::parse(client_->Get("/api/stats")->body);
    EXPECT_EQ(stats["counts"]["gold"], 1);
    EXPECT_EQ(stats["counts"]["rejected"], 1);
    EXPECT_EQ(stats["decisions"], 2);
    EXPECT_EQ(stats["cost"]["n_images"], 2);
}

TEST_F(ServiceTest, RaceHasExactlyOneWinner) {
    store_->add(rec("race"), image_);
    constexpr int kClients = 8;
    std::atomic<int> ready{0}, ok{0}, conflict{0};
    std::vector<std::thread> ts;
    for (int t = 0; t < kClients; ++t) {
        ts.emplace_back([&, t] {
            httplib::Client c("127.0.0.1", server_->port());
            const std::string body = json{{"decision", "gold"}, {"expected_version", 1}, {"note", std::to_string(t)}}.dump();
            ++ready;
            while (ready < kClients) std::this_thread::yield();
            const auto r = c.Put("/api/annotations/race", body, "application/json");
            if (r && r->status == 200) ++ok;
            if (r && r->status == 409) ++conflict;
        });
    }
    for (auto& t : ts) t.join();
    EXPECT_EQ(ok, 1);
    EXPECT_EQ(conflict, kClients - 1);
    EXPECT_EQ(store_->get("race").version, 2);
}

TEST_F(ServiceTest, RevisionTimeTracksScriptedDelay) {
    const double delay = 0.15;
    for (int i = 0; i < 4; ++i) store_->add(rec("t" + std::to_string(i)), image_);
    for (int i = 0; i < 4; ++i) {
        const std::string id = "t" + std::to_string(i);
        ASSERT_EQ(client_->Get("/api/annotations/" + id)->status, 200);
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        ASSERT_EQ(put(id, {{"decision", "gold"}, {"expected_version", 1}})->status, 200);
    }
    const auto stats = json::parse(client_->Get("/api/stats")->body);
    EXPECT_NEAR(stats["mean_revision_seconds"].get<double>(), delay, 0.1 * delay);
    const double expect = 2.237 + stats["mean_revision_seconds"].get<double>() + 1950.0 / 4;
    EXPECT_NEAR(stats["cost"]["cost_per_image"].get<double>(), expect, 1e-9);
}

TEST_F(ServiceTest, PortBusyIsStartupError) {
    ServerOptions opt;
    opt.port = server_->port();
    Server second(*store_, opt);
    EXPECT_THROW(second.start(), IoError);
}

}  // namespace
}  // namespace elseg::review
