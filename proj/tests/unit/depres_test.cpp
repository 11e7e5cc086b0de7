#include <depman/dependency.hpp>
#include <depman/depres.hpp>
#include <depman/error.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace depman;

namespace {

Errc error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::NotAnArchive;
}

DeployableUnit needing(const std::string& name, DependencySpec deps, ModuleKind kind = ModuleKind::component) {
    return UnitBuilder(name, kind).deps(std::move(deps)).build();
}

DependencySpec units(std::vector<std::string> names) {
    DependencySpec d;
    d.requires_unit = std::move(names);
    return d;
}

DependencyGraph graph_of(const std::set<std::string>& nodes, const std::set<std::pair<std::string, std::string>>& edges,
                         const std::vector<std::string>& insertion) {
    DependencyGraph g;
    for (const auto& n : insertion) {
        DependencySpec d;
        for (const auto& [a, b] : edges) {
            if (a == n) d.requires_unit.push_back(b);
        }
        g.add_node(n, d);
    }
    EXPECT_EQ(g.nodes, nodes);
    return g;
}

ServerSnapshot bare_server() {
    ServerSnapshot s;
    s.id = "s1";
    s.site = "siteA";
    s.registry_site = "siteA";
    s.services = {Service::transaction, Service::registry, Service::security, Service::ear};
    return s;
}

} // namespace

TEST(Deps, ParseExamples) {
    EXPECT_TRUE(parse_dependency_spec("<dependencies/>").empty());
    auto d = parse_dependency_spec(R"(<dependencies><requires-unit name="bankRA"/><requires-service name="mail"/></dependencies>)");
    EXPECT_EQ(d.requires_unit, std::vector<std::string>{"bankRA"});
    EXPECT_EQ(d.requires_service, std::vector<Service>{Service::mail});
    EXPECT_TRUE(d.requires_resource.empty());

    auto full = parse_dependency_spec(R"(<dependencies>
        <requires-resource name="MailFactory1" service="mail"/>
        <requires-site-link service="registry" site="siteB"/>
        <requires-service name="ejb-container"/>
    </dependencies>)");
    ASSERT_EQ(full.requires_resource.size(), 1u);
    EXPECT_EQ(full.requires_resource[0].resource, "MailFactory1");
    EXPECT_EQ(full.requires_resource[0].service, Service::mail);
    ASSERT_EQ(full.requires_site_link.size(), 1u);
    EXPECT_EQ(full.requires_site_link[0].site, "siteB");
    EXPECT_EQ(full.requires_service, std::vector<Service>{Service::ejb_container});
}

TEST(Deps, ParseErrors) {
    EXPECT_EQ(error_of([] { parse_dependency_spec(R"(<dependencies><requires-service name="bogus"/></dependencies>)"); }),
              Errc::UnknownService);
    EXPECT_EQ(error_of([] {
                  parse_dependency_spec(R"(<dependencies><requires-unit name="a"/><requires-unit name="a"/></dependencies>)");
              }),
              Errc::DuplicateRequirement);
    EXPECT_EQ(error_of([] { parse_dependency_spec("<deps/>"); }), Errc::MalformedDeps);
    EXPECT_EQ(error_of([] { parse_dependency_spec("<dependencies><requires-unit/></dependencies>"); }), Errc::MalformedDeps);
    EXPECT_EQ(error_of([] { parse_dependency_spec(R"(<dependencies><requires-site-link service="mail" site="b"/></dependencies>)"); }),
              Errc::MalformedDeps);
    EXPECT_EQ(error_of([] { parse_dependency_spec("<dependencies"); }), Errc::MalformedDeps);
}

TEST(Deps, SerializeRoundTrip) {
    DependencySpec d;
    d.requires_unit = {"z", "a"};
    d.requires_service = {Service::ws, Service::mail};
    d.requires_resource = {{"R1", Service::mail}};
    d.requires_site_link = {{Service::registry, "siteB"}};
    auto text = serialize_dependency_spec(d);
    EXPECT_EQ(parse_dependency_spec(text), d);
    EXPECT_EQ(serialize_dependency_spec(parse_dependency_spec(text)), text);
}

TEST(Deps, MandatoryServiceIsAWarningOnly) {
    DependencySpec d;
    d.requires_service = {Service::transaction, Service::mail};
    auto w = dependency_warnings(d);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_NE(w[0].find("transaction"), std::string::npos);
    auto findings = check_against_target(needing("u", d), [] {
        auto s = bare_server();
        s.services.insert(Service::mail);
        return s;
    }());
    EXPECT_TRUE(findings.empty());
}

TEST(Graph, BuildExamples) {
    auto g = build_graph({needing("a", units({"b"})), needing("b", {})});
    EXPECT_EQ(g.nodes, (std::set<std::string>{"a", "b"}));
    EXPECT_EQ(g.edges, (std::set<std::pair<std::string, std::string>>{{"a", "b"}}));

    auto diamond = build_graph({needing("a", units({"b", "c"})), needing("b", units({"d"})), needing("c", units({"d"})),
                                needing("d", {})});
    EXPECT_EQ(diamond.nodes.size(), 4u);
    EXPECT_EQ(diamond.edges.size(), 4u);

    EXPECT_EQ(error_of([] { build_graph({needing("x", {}), needing("x", {}, ModuleKind::web)}); }), Errc::DuplicateUnitName);
}

TEST(Graph, InstallOrderExamples) {
    EXPECT_EQ(install_order(build_graph({needing("a", {})})), std::vector<std::string>{"a"});

    std::set<std::string> nodes{"a", "b", "c", "d"};
    std::set<std::pair<std::string, std::string>> edges{{"a", "b"}, {"a", "c"}, {"b", "d"}, {"c", "d"}};
    auto order = install_order(graph_of(nodes, edges, {"a", "b", "c", "d"}));
    EXPECT_EQ(order, (std::vector<std::string>{"d", "b", "c", "a"}));
    auto all = oracle::all_topological_orders(nodes, edges);
    EXPECT_EQ(all.size(), 2u);
    EXPECT_NE(std::find(all.begin(), all.end(), order), all.end());
    EXPECT_EQ(oracle::lexicographic_min(all), order);

    auto stop = stop_order(graph_of(nodes, edges, {"d", "c", "b", "a"}));
    EXPECT_EQ(stop, (std::vector<std::string>{"a", "c", "b", "d"}));
}

TEST(Graph, ExternalPrerequisitesAreExcluded) {
    auto g = build_graph({needing("app", units({"bankRA", "lib"})), needing("lib", {})});
    EXPECT_EQ(install_order(g), (std::vector<std::string>{"lib", "app"}));
}

TEST(Graph, CycleDetected) {
    auto g = build_graph({needing("a", units({"b"})), needing("b", units({"a"}))});
    try {
        install_order(g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::CycleDetected);
        EXPECT_EQ(e.detail(), "[a, b]");
    }
    EXPECT_EQ(find_cycle(g), (std::vector<std::string>{"a", "b"}));

    auto tri = build_graph({needing("x", units({"z"})), needing("y", units({"x"})), needing("z", units({"y"})),
                            needing("free", {})});
    auto cycle = find_cycle(tri);
    ASSERT_EQ(cycle.size(), 3u);
    EXPECT_EQ(cycle.front(), "x");
    for (std::size_t i = 0; i < cycle.size(); ++i) {
        EXPECT_TRUE(tri.edges.count({cycle[i], cycle[(i + 1) % cycle.size()]}));
    }
    EXPECT_TRUE(find_cycle(build_graph({needing("a", {})})).empty());
}

TEST(GraphProperty, RandomDagsMatchBruteForceOracle) {
    fixture::Rng rng(0x70B0);
    for (int sample = 0; sample < 600; ++sample) {
        int n = rng.between(1, 7);
        std::vector<std::string> names;
        for (int i = 0; i < n; ++i) names.push_back(std::string(1, static_cast<char>('a' + i)) + rng.token(0, 2));
        std::sort(names.begin(), names.end());
        names.erase(std::unique(names.begin(), names.end()), names.end());
        // A hidden rank makes every sampled edge point forward, so the graph is acyclic.
        std::vector<std::string> ranked = names;
        std::shuffle(ranked.begin(), ranked.end(), rng.engine());
        std::set<std::pair<std::string, std::string>> edges;
        double density = rng.between(0, 10) / 10.0;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            for (std::size_t j = i + 1; j < ranked.size(); ++j) {
                if (rng.chance(density)) edges.insert({ranked[j], ranked[i]});
            }
        }
        std::set<std::string> nodes(names.begin(), names.end());

        auto valid = oracle::all_topological_orders(nodes, edges);
        ASSERT_FALSE(valid.empty());
        auto expected = oracle::lexicographic_min(valid);

        std::vector<std::string> insertion = names;
        for (int perm = 0; perm < 4; ++perm) {
            std::shuffle(insertion.begin(), insertion.end(), rng.engine());
            auto g = graph_of(nodes, edges, insertion);
            auto order = install_order(g);
            ASSERT_TRUE(oracle::is_topological(order, nodes, edges)) << "sample " << sample;
            ASSERT_EQ(order, expected) << "sample " << sample;
            auto stop = stop_order(g);
            ASSERT_EQ(stop, std::vector<std::string>(order.rbegin(), order.rend()));
        }
    }
}

TEST(Check, EmptyDepsAlwaysPass) {
    EXPECT_TRUE(check_against_target(UnitBuilder("w", ModuleKind::web).build(), bare_server()).empty());
}

TEST(Check, MissingUnit) {
    auto findings = check_against_target(fixture::acct_app(), bare_server());
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_EQ(findings[0].unit, "acctApp");
    EXPECT_EQ(findings[0].kind, DependencyKind::unit);
    EXPECT_EQ(findings[0].detail, "bankRA");

    auto s = bare_server();
    s.installed["bankRA"] = {ModuleKind::adapter, ModuleState::installed, 1, {}};
    EXPECT_TRUE(check_against_target(fixture::acct_app(), s).empty());
}

TEST(Check, MissingService) {
    DependencySpec d;
    d.requires_service = {Service::mail};
    auto findings = check_against_target(needing("u", d), bare_server());
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_EQ(findings[0].kind, DependencyKind::service);
    EXPECT_EQ(findings[0].detail, "mail");
}

TEST(Check, MissingResource) {
    DependencySpec d;
    d.requires_resource = {{"MailFactory1", Service::mail}};
    auto s = bare_server();
    s.services.insert(Service::mail);
    auto findings = check_against_target(needing("u", d), s);
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_EQ(findings[0].kind, DependencyKind::resource);
    EXPECT_EQ(findings[0].detail, "MailFactory1@mail");

    s.resources["MailFactory1"] = Service::transaction;
    EXPECT_EQ(check_against_target(needing("u", d), s).size(), 1u);
    s.resources["MailFactory1"] = Service::mail;
    EXPECT_TRUE(check_against_target(needing("u", d), s).empty());
}

TEST(Check, SiteLink) {
    DependencySpec d;
    d.requires_site_link = {{Service::registry, "siteB"}};
    auto unit = needing("u", d);

    auto self = bare_server();
    auto findings = check_against_target(unit, self);
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_EQ(findings[0].kind, DependencyKind::site_link);
    EXPECT_EQ(findings[0].detail, "registry→siteB");

    auto linked = bare_server();
    linked.registry_endpoint = "sB";
    linked.registry_site = "siteB";
    EXPECT_TRUE(check_against_target(unit, linked).empty());

    auto on_b = bare_server();
    on_b.site = on_b.registry_site = "siteB";
    EXPECT_TRUE(check_against_target(unit, on_b).empty());
}

TEST(Check, ChildrenAreEvaluatedAndSiblingsSatisfy) {
    DependencySpec child_deps;
    child_deps.requires_unit = {"front", "ledger"};
    child_deps.requires_service = {Service::ws};
    auto app = UnitBuilder("app", ModuleKind::application)
                   .child(needing("acct", child_deps))
                   .child(UnitBuilder("front", ModuleKind::web).build())
                   .build();
    auto findings = check_against_target(app, bare_server());
    ASSERT_EQ(findings.size(), 2u);
    std::set<std::pair<DependencyKind, std::string>> got;
    for (const auto& f : findings) {
        EXPECT_EQ(f.unit, "acct");
        got.insert({f.kind, f.detail});
    }
    EXPECT_TRUE(got.count({DependencyKind::unit, "ledger"}));
    EXPECT_TRUE(got.count({DependencyKind::service, "ws"}));
}

TEST(CheckProperty, MonotoneUnderInstallAndProvision) {
    fixture::Rng rng(0x303);
    std::vector<std::string> pool = {"u1", "u2", "u3", "u4"};
    std::vector<std::string> res_pool = {"R1", "R2", "R3"};
    for (int i = 0; i < 200; ++i) {
        DependencySpec d;
        for (const auto& u : pool) {
            if (rng.chance(0.4)) d.requires_unit.push_back(u);
        }
        for (const auto& r : res_pool) {
            if (rng.chance(0.4)) d.requires_resource.push_back({r, rng.chance(0.5) ? Service::mail : Service::transaction});
        }
        if (rng.chance(0.5)) d.requires_service.push_back(Service::mail);
        auto unit = needing("subject", d);

        auto s = bare_server();
        s.services.insert(Service::mail);
        auto before = check_against_target(unit, s).size();
        for (int step = 0; step < 6; ++step) {
            if (rng.chance(0.5)) {
                s.installed[rng.pick(pool)] = {ModuleKind::component, ModuleState::installed, 0, {}};
            } else {
                const auto& r = rng.pick(res_pool);
                if (!s.resources.count(r)) s.resources[r] = rng.chance(0.5) ? Service::mail : Service::transaction;
            }
            auto after = check_against_target(unit, s).size();
            ASSERT_LE(after, before);
            before = after;
        }
    }
}
