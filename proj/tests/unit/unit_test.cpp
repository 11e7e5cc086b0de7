#include <depman/error.hpp>
#include <depman/unit.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <functional>

using namespace depman;

namespace {

std::vector<ViolationCode> codes(const std::vector<Violation>& vs) {
    std::vector<ViolationCode> out;
    for (const auto& v : vs) out.push_back(v.code);
    return out;
}

Errc open_error(std::string_view archive) {
    try {
        open_unit(archive);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "archive opened";
    return Errc::NotAnArchive;
}

void set_descriptor(DeployableUnit& u, DescriptorNode d) {
    u.entries[std::string(kDescriptorEntry)] = canonical_bytes(d);
    u.descriptor = std::move(d);
}

} // namespace

TEST(Unit, OpensMinimalWebUnit) {
    auto archive = oracle::zip_write(std::map<std::string, std::string>{
        {"META-INF/unit.xml", R"(<unit name="w1" kind="web" version="1.0"/>)"}});
    auto u = open_unit(archive);
    EXPECT_EQ(u.name, "w1");
    EXPECT_EQ(u.kind, ModuleKind::web);
    EXPECT_EQ(u.version, "1.0");
    EXPECT_TRUE(u.children.empty());
    EXPECT_TRUE(u.deps.empty());
    EXPECT_TRUE(validate_unit(u).empty());
}

TEST(Unit, OpensApplicationBuiltByIndependentWriter) {
    std::string acct_xml = R"(<unit name="acct" kind="component" version="1.0">
  <component name="AccountBean"/>
  <reference name="jdbc/AccountDB" type="resource"/>
</unit>)";
    std::string front_xml = R"(<unit name="front" kind="web" version="2.1"><reference name="mail/Notify" type="resource"/></unit>)";
    std::string app_xml = R"(<unit name="acctApp" kind="application" version="1.0">
  <contains module="acct.cmp"/>
  <contains module="front.web"/>
</unit>)";
    std::string acct = oracle::zip_write_ordered({{"META-INF/unit.xml", acct_xml}, {"classes/AccountBean.class", "\xca\xfe"}});
    std::string front = oracle::zip_write_ordered({{"META-INF/unit.xml", front_xml}});
    std::string app = oracle::zip_write_ordered({{"front.web", front}, {"META-INF/unit.xml", app_xml}, {"acct.cmp", acct}});

    auto u = open_unit(app);
    EXPECT_EQ(u.name, "acctApp");
    EXPECT_EQ(u.kind, ModuleKind::application);
    ASSERT_EQ(u.children.size(), 2u);
    EXPECT_EQ(u.children[0].name, "acct");
    EXPECT_EQ(u.children[0].kind, ModuleKind::component);
    EXPECT_EQ(u.children[0].entries.at("classes/AccountBean.class"), "\xca\xfe");
    EXPECT_EQ(component_names(u.children[0]), std::vector<std::string>{"AccountBean"});
    EXPECT_EQ(u.children[1].name, "front");
    EXPECT_EQ(u.children[1].kind, ModuleKind::web);
    EXPECT_EQ(u.children[1].version, "2.1");
    EXPECT_EQ(reference_names(u.children[1]), std::vector<std::string>{"mail/Notify"});
    EXPECT_EQ(u.children[0].descriptor, parse_xml(acct_xml));
    EXPECT_TRUE(validate_unit(u).empty());
}

TEST(Unit, OpenErrors) {
    EXPECT_EQ(open_error("not a zip"), Errc::NotAnArchive);
    EXPECT_EQ(open_error(oracle::zip_write(std::map<std::string, std::string>{{"README", "x"}})),
              Errc::MissingDescriptor);
    EXPECT_EQ(open_error(oracle::zip_write(std::map<std::string, std::string>{{"META-INF/unit.xml", "<unit"}})),
              Errc::MalformedDescriptor);
    EXPECT_EQ(open_error(oracle::zip_write(std::map<std::string, std::string>{
                  {"META-INF/unit.xml", R"(<unit name="a" kind="program" version="1"/>)"}})),
              Errc::MalformedDescriptor);
    EXPECT_EQ(open_error(oracle::zip_write(std::map<std::string, std::string>{
                  {"META-INF/unit.xml", R"(<unit name="a" kind="application" version="1"><contains module="x.web"/></unit>)"}})),
              Errc::MissingChild);

    std::string web = write_unit(UnitBuilder("x", ModuleKind::web).build());
    EXPECT_EQ(open_error(oracle::zip_write(std::map<std::string, std::string>{
                  {"META-INF/unit.xml", R"(<unit name="a" kind="application" version="1"><contains module="x.cmp"/></unit>)"},
                  {"x.cmp", web}})),
              Errc::KindMismatch);
}

TEST(Unit, MalformedDescriptorReportsLine) {
    try {
        open_unit(oracle::zip_write(
            std::map<std::string, std::string>{{"META-INF/unit.xml", "<unit name='a'\n kind='web'\n version='1'>\n<x>\n</unit>"}}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::MalformedDescriptor);
        EXPECT_NE(e.detail().find("line 5"), std::string::npos) << e.detail();
    }
}

TEST(Unit, ValidateExamples) {
    auto w1 = UnitBuilder("w1", ModuleKind::web).build();
    EXPECT_TRUE(validate_unit(w1).empty());

    auto renamed = w1;
    renamed.name = "y";
    EXPECT_EQ(codes(validate_unit(renamed)), std::vector{ViolationCode::NameMismatch});

    auto with_contains = w1;
    DescriptorNode d = with_contains.descriptor;
    d.children.push_back({"contains", {{"module", "z.cmp"}}, std::nullopt, {}});
    set_descriptor(with_contains, d);
    EXPECT_EQ(codes(validate_unit(with_contains)), std::vector{ViolationCode::ChildrenNotAllowed});
}

TEST(Unit, ValidateSchemaViolations) {
    auto u = UnitBuilder("w1", ModuleKind::web).build();
    DescriptorNode d = u.descriptor;
    d.children.push_back({"servlet", {{"name", "S"}}, std::nullopt, {}});
    set_descriptor(u, d);
    auto vs = validate_unit(u);
    ASSERT_EQ(vs.size(), 1u);
    EXPECT_EQ(vs[0].code, ViolationCode::SchemaViolation);
    EXPECT_NE(vs[0].where.find("servlet"), std::string::npos);
}

TEST(Unit, NestedApplicationIsAViolation) {
    auto inner = UnitBuilder("inner", ModuleKind::application).child(UnitBuilder("w", ModuleKind::web).build()).build();
    auto outer = UnitBuilder("outer", ModuleKind::application).child(inner).build();
    auto c = codes(validate_unit(outer));
    EXPECT_NE(std::find(c.begin(), c.end(), ViolationCode::NestedApplication), c.end());
}

TEST(Unit, KindFromExtension) {
    EXPECT_EQ(kind_from_extension("a.app"), ModuleKind::application);
    EXPECT_EQ(kind_from_extension("a.web"), ModuleKind::web);
    EXPECT_EQ(kind_from_extension("a.cmp"), ModuleKind::component);
    EXPECT_EQ(kind_from_extension("dir/a.ada"), ModuleKind::adapter);
    EXPECT_EQ(kind_from_extension("a.jar"), std::nullopt);
    EXPECT_EQ(kind_from_extension("noext"), std::nullopt);
}

TEST(Unit, WriteOpenRoundTripExamples) {
    auto w1 = UnitBuilder("w1", ModuleKind::web).build();
    EXPECT_EQ(open_unit(write_unit(w1)), w1);

    auto app = fixture::acct_app();
    auto reopened = open_unit(write_unit(app));
    EXPECT_EQ(reopened, app);
    ASSERT_EQ(reopened.children.size(), 2u);
    EXPECT_EQ(reopened.children[1], fixture::front_web());

    EXPECT_EQ(write_unit(app), write_unit(app));
    EXPECT_EQ(write_unit(reopened), write_unit(app));
}

TEST(UnitProperty, RandomUnitsRoundTripAndValidate) {
    fixture::Rng rng(0x5eed0001);
    for (int i = 0; i < 60; ++i) {
        auto u = fixture::random_unit(rng);
        ASSERT_TRUE(validate_unit(u).empty()) << u.name;
        auto bytes = write_unit(u);
        auto back = open_unit(bytes);
        EXPECT_EQ(back, u);
        EXPECT_EQ(write_unit(back), bytes);
        // Independent reader sees the same entries.
        EXPECT_EQ(oracle::zip_read(bytes), u.entries);

        std::size_t contains = 0;
        for (const auto& n : u.descriptor.children) contains += n.name == "contains";
        EXPECT_EQ(u.children.size(), contains);
    }
}

TEST(UnitProperty, EachMutationYieldsItsViolation) {
    using M = std::function<bool(DeployableUnit&)>; // returns false when not applicable
    struct Case {
        const char* label;
        ViolationCode expected;
        M mutate;
    };
    std::vector<Case> cases = {
        {"rename", ViolationCode::NameMismatch,
         [](DeployableUnit& u) {
             u.name += "x";
             return true;
         }},
        {"kind", ViolationCode::KindMismatch,
         [](DeployableUnit& u) {
             if (u.kind == ModuleKind::application) return false;
             u.kind = u.kind == ModuleKind::web ? ModuleKind::adapter : ModuleKind::web;
             return true;
         }},
        {"drop descriptor", ViolationCode::MissingDescriptor,
         [](DeployableUnit& u) { return u.entries.erase(std::string(kDescriptorEntry)) == 1; }},
        {"stale descriptor", ViolationCode::DescriptorMismatch,
         [](DeployableUnit& u) {
             DescriptorNode d = u.descriptor;
             d.children.push_back({"component", {{"name", "Zz9Extra"}}, std::nullopt, {}});
             u.entries[std::string(kDescriptorEntry)] = canonical_bytes(d);
             return true;
         }},
        {"deps", ViolationCode::DepsMismatch,
         [](DeployableUnit& u) {
             u.deps.requires_unit.push_back("phantom");
             return true;
         }},
        {"reserved", ViolationCode::ReservedEntry,
         [](DeployableUnit& u) {
             u.entries[std::string(kManifestEntry)] = "stub:x:0000000000000000\n";
             return true;
         }},
        {"contains in leaf", ViolationCode::ChildrenNotAllowed,
         [](DeployableUnit& u) {
             if (u.kind == ModuleKind::application) return false;
             DescriptorNode d = u.descriptor;
             d.children.push_back({"contains", {{"module", "q.web"}}, std::nullopt, {}});
             set_descriptor(u, d);
             return true;
         }},
        {"duplicate component", ViolationCode::DuplicateName,
         [](DeployableUnit& u) {
             DescriptorNode d = u.descriptor;
             d.children.push_back({"component", {{"name", "Twin"}}, std::nullopt, {}});
             d.children.push_back({"component", {{"name", "Twin"}}, std::nullopt, {}});
             set_descriptor(u, d);
             return true;
         }},
        {"version", ViolationCode::SchemaViolation,
         [](DeployableUnit& u) {
             DescriptorNode d = u.descriptor;
             d.attributes["version"] = "v.one";
             u.version = "v.one";
             set_descriptor(u, d);
             return true;
         }},
        {"drop child entry", ViolationCode::MissingChild,
         [](DeployableUnit& u) {
             if (u.kind != ModuleKind::application) return false;
             return u.entries.erase(u.descriptor.children.front().attribute_or("module", "")) == 1;
         }},
        {"drop child", ViolationCode::ChildCountMismatch,
         [](DeployableUnit& u) {
             if (u.kind != ModuleKind::application) return false;
             u.children.pop_back();
             return true;
         }},
        {"altered child", ViolationCode::ChildMismatch,
         [](DeployableUnit& u) {
             if (u.kind != ModuleKind::application) return false;
             u.children.front().entries["extra.txt"] = "x";
             return true;
         }},
    };

    fixture::Rng rng(0x5eed0002);
    std::map<std::string, int> applied;
    for (int i = 0; i < 40; ++i) {
        auto base = fixture::random_unit(rng);
        for (const auto& c : cases) {
            auto u = base;
            if (!c.mutate(u)) continue;
            ++applied[c.label];
            EXPECT_EQ(codes(validate_unit(u)), std::vector{c.expected}) << c.label << " on " << base.name;
        }
    }
    for (const auto& c : cases) EXPECT_GT(applied[c.label], 0) << c.label << " never applied";
}
