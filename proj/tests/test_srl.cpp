#include <string>
#include <thread>
#include <vector>

#include "cvemap/errors.hpp"
#include "cvemap/extractor.hpp"
#include "cvemap/srl.hpp"
#include "doctest.h"
#include "httplib.h"

using namespace cvemap;

namespace {

RuleBasedBackend make_backend() {
  return RuleBasedBackend(Lexicon::built_in_default().all_verbs());
}

Sentence sent(const std::string& text, int index = 0) {
  Sentence s;
  s.doc_id = "doc";
  s.index = index;
  s.text = text;
  return s;
}

const SrlFrame* frame_for(const std::vector<SrlFrame>& frames,
                          const std::string& lemma) {
  for (const auto& f : frames)
    if (f.verb_lemma == lemma) return &f;
  return nullptr;
}

std::string arg(const SrlFrame& f, const std::string& label) {
  const auto* v = f.arg(label);
  return v ? *v : std::string();
}

}  // namespace

TEST_CASE("simple transitive clause yields one full frame") {
  auto backend = make_backend();
  const auto frames = backend.parse_sentence(sent("remote attackers delete log files"));
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].verb == "delete");
  CHECK(frames[0].verb_lemma == "delete");
  CHECK(arg(frames[0], "ARG0") == "remote attackers");
  CHECK(arg(frames[0], "ARG1") == "log files");
}

TEST_CASE("inflected predicates are lemmatized") {
  auto backend = make_backend();
  const auto frames =
      backend.parse_sentence(sent("unauthenticated user changes the ownership of the files"));
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].verb == "changes");
  CHECK(frames[0].verb_lemma == "change");
  CHECK(arg(frames[0], "ARG0") == "unauthenticated user");
  CHECK(arg(frames[0], "ARG1") == "the ownership of the files");
}

TEST_CASE("a determiner blocks the noun reading of a verb form") {
  auto backend = make_backend();
  const auto frames = backend.parse_sentence(sent("The install fails on boot"));
  CHECK(frame_for(frames, "install") == nullptr);
}

TEST_CASE("subject scan crosses commas between actor qualifiers") {
  auto backend = make_backend();
  const auto frames = backend.parse_sentence(
      sent("unauthenticated, remote attacker install additional jee applications"));
  REQUIRE(frames.size() == 1);
  CHECK(arg(frames[0], "ARG0") == "unauthenticated, remote attacker");
  CHECK(arg(frames[0], "ARG1") == "additional jee applications");
}

TEST_CASE("infinitive complement inherits the outer object as its subject") {
  auto backend = make_backend();
  const auto frames = backend.parse_sentence(
      sent("The bug allows remote attackers to delete log files"));
  const auto* allow = frame_for(frames, "allow");
  const auto* del = frame_for(frames, "delete");
  REQUIRE(allow != nullptr);
  REQUIRE(del != nullptr);
  CHECK(arg(*allow, "ARG1") == "remote attackers");
  CHECK(arg(*allow, "ARG2") == "delete log files");
  CHECK(arg(*del, "ARG0") == "remote attackers");
  CHECK(arg(*del, "ARG1") == "log files");
}

TEST_CASE("gerund complement after into keeps the marker out of the span") {
  auto backend = make_backend();
  const auto frames = backend.parse_sentence(
      sent("The page tricks the admin into deleting a file"));
  const auto* trick = frame_for(frames, "trick");
  const auto* del = frame_for(frames, "delete");
  REQUIRE(trick != nullptr);
  REQUIRE(del != nullptr);
  CHECK(arg(*trick, "ARG1") == "the admin");
  CHECK(arg(*trick, "ARG2") == "deleting a file");
  CHECK(arg(*del, "ARG0") == "the admin");
  CHECK(arg(*del, "ARG1") == "a file");
}

TEST_CASE("verb coordination continues with the same subject") {
  auto backend = make_backend();
  const auto frames = backend.parse_sentence(
      sent("attackers read kernel memory and cause a crash"));
  const auto* rd = frame_for(frames, "read");
  const auto* cause = frame_for(frames, "cause");
  REQUIRE(rd != nullptr);
  REQUIRE(cause != nullptr);
  CHECK(arg(*rd, "ARG0") == "attackers");
  CHECK(arg(*cause, "ARG0") == "attackers");
  CHECK(arg(*cause, "ARG1") == "a crash");
}

TEST_CASE("coordination skips an adverb before the next conjunct") {
  auto backend = make_backend();
  const auto frames = backend.parse_sentence(
      sent("attackers read heap buffers and possibly cause a crash"));
  const auto* cause = frame_for(frames, "cause");
  REQUIRE(cause != nullptr);
  CHECK(arg(*cause, "ARG0") == "attackers");
}

TEST_CASE("trailing platform qualifier splits off as a location") {
  auto backend = make_backend();
  const auto frames = backend.parse_sentence(
      sent("attackers read arbitrary kernel memory on 64-bit systems"));
  REQUIRE(frames.size() == 1);
  CHECK(arg(frames[0], "ARG1") == "arbitrary kernel memory");
  CHECK(arg(frames[0], "ARGM-LOC") == "on 64-bit systems");
}

TEST_CASE("a digit free trailing phrase stays inside the object") {
  auto backend = make_backend();
  const auto frames = backend.parse_sentence(
      sent("attackers view arbitrary files on the system"));
  REQUIRE(frames.size() == 1);
  CHECK(arg(frames[0], "ARG1") == "arbitrary files on the system");
  CHECK(arg(frames[0], "ARGM-LOC").empty());
}

TEST_CASE("manner phrase is captured with its preposition") {
  auto backend = make_backend();
  const auto frames = backend.parse_sentence(
      sent("attackers delete arbitrary files via crafted requests"));
  REQUIRE(frames.size() == 1);
  CHECK(arg(frames[0], "ARG1") == "arbitrary files");
  CHECK(arg(frames[0], "ARGM-MNR") == "via crafted requests");
}

TEST_CASE("full advisory sentence produces the expected frame chain") {
  auto backend = make_backend();
  const auto frames = backend.parse_sentence(sent(
      "Linux kernel does not perform certain required access_ok checks, which "
      "allows attackers to read arbitrary kernel memory on 64-bit systems and "
      "cause a denial of service and possibly read kernel memory on 32-bit "
      "systems."));
  int reads = 0;
  for (const auto& f : frames)
    if (f.verb_lemma == "read") ++reads;
  CHECK(reads == 2);
  const auto* cause = frame_for(frames, "cause");
  REQUIRE(cause != nullptr);
  CHECK(arg(*cause, "ARG0") == "attackers");
  CHECK(arg(*cause, "ARG1") == "a denial of service");
  for (const auto& f : frames)
    if (f.verb_lemma == "read") CHECK(arg(f, "ARG0") == "attackers");
}

TEST_CASE("document splitting assigns sentence indices") {
  const auto sentences = split_sentences(
      "Attackers read memory. A crash follows later.", "cve-1");
  REQUIRE(sentences.size() == 2);
  CHECK(sentences[0].doc_id == "cve-1");
  CHECK(sentences[0].index == 0);
  CHECK(sentences[1].index == 1);
}

TEST_CASE("rule backend is deterministic and concurrent safe") {
  auto backend = make_backend();
  CHECK(backend.concurrent_safe());
  const auto s = sent(
      "The bug allows remote attackers to read files and cause a crash");
  const auto first = backend.parse_sentence(s);
  for (int i = 0; i < 5; ++i) {
    const auto again = backend.parse_sentence(s);
    REQUIRE(again.size() == first.size());
    for (std::size_t k = 0; k < first.size(); ++k) {
      CHECK(again[k].verb == first[k].verb);
      CHECK(again[k].arguments == first[k].arguments);
    }
  }
}

TEST_CASE("http adapter decodes both response schemas") {
  httplib::Server srv;
  srv.Post("/frames", [](const httplib::Request& req, httplib::Response& res) {
    CHECK(req.body.find("sentence") != std::string::npos);
    res.set_content(
        R"({"frames":[{"verb":"deletes","lemma":"delete",)"
        R"("arguments":{"ARG0":"remote attackers","ARG1":"log files","BOGUS":"x"}}]})",
        "application/json");
  });
  srv.Post("/bio", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(
        R"({"words":["attackers","read","kernel","memory"],)"
        R"("verbs":[{"verb":"read","tags":["B-ARG0","B-V","B-ARG1","I-ARG1"]}]})",
        "application/json");
  });
  srv.Post("/broken", [](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  struct Stopper {
    httplib::Server& srv;
    std::thread& t;
    ~Stopper() {
      srv.stop();
      if (t.joinable()) t.join();
    }
  } stopper{srv, server};

  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  const auto verbs = Lexicon::built_in_default().all_verbs();

  {
    HttpBackend backend(base + "/frames", verbs);
    CHECK(!backend.concurrent_safe());
    const auto frames = backend.parse_sentence(sent("remote attackers delete log files"));
    REQUIRE(frames.size() == 1);
    CHECK(frames[0].verb_lemma == "delete");
    CHECK(arg(frames[0], "ARG0") == "remote attackers");
    CHECK(arg(frames[0], "ARG1") == "log files");
    CHECK(frames[0].arguments.count("BOGUS") == 0);
  }
  {
    HttpBackend backend(base + "/bio", verbs);
    const auto frames = backend.parse_sentence(sent("attackers read kernel memory"));
    REQUIRE(frames.size() == 1);
    CHECK(frames[0].verb == "read");
    CHECK(arg(frames[0], "ARG0") == "attackers");
    CHECK(arg(frames[0], "ARG1") == "kernel memory");
  }
  {
    HttpBackend backend(base + "/broken", verbs);
    CHECK_THROWS_AS(backend.parse_sentence(sent("attackers read memory")),
                    TransportError);
  }

  srv.stop();
  server.join();

  HttpBackend unreachable(base + "/frames", verbs);
  CHECK_THROWS_AS(unreachable.parse_sentence(sent("attackers read memory")),
                  TransportError);
  CHECK_THROWS_AS(HttpBackend("ftp://bad", verbs), ValidationError);
}
