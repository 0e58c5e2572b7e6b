#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>

#include "tabdit/errors.hpp"
#include "tabdit/ingest.hpp"

using namespace tabdit;

TEST_CASE("csv parsing handles quoting, escapes and line endings") {
    const std::string text =
        "id,note,amount\r\n"
        "a,\"hello, world\",3\n"
        "b,\"she said \"\"hi\"\"\",4\r\n"
        "c,plain,5\n";
    CsvTable table = parse_csv(text);
    CHECK(table.header == std::vector<std::string>{"id", "note", "amount"});
    REQUIRE(table.rows.size() == 3);
    CHECK(table.rows[0][1] == "hello, world");
    CHECK(table.rows[1][1] == "she said \"hi\"");
    CHECK(table.rows[2][2] == "5");
    CHECK(table.column("amount") == 2);
    CHECK(table.column("missing") == -1);
}

TEST_CASE("csv format and parse round trip with awkward values") {
    std::vector<std::string> header = {"k", "v"};
    std::vector<std::vector<std::string>> rows = {
        {"a", "with,comma"}, {"b", "with\"quote"}, {"c", "with\nnewline"}, {"d", ""}};
    CsvTable back = parse_csv(format_csv(header, rows));
    CHECK(back.header == header);
    REQUIRE(back.rows.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(back.rows[i] == rows[i]);
}

TEST_CASE("csv structural errors") {
    CHECK_THROWS_AS(parse_csv(""), Error);
    CHECK_THROWS_AS(parse_csv("a,b\n1\n"), Error);          // ragged row
    CHECK_THROWS_AS(parse_csv("a,b\n1,\"x\n"), Error);      // unterminated quote
    CHECK_THROWS_AS(parse_csv("a,b\n1,x\"y\n"), Error);     // stray quote
}

TEST_CASE("toy child table becomes one series per key with correct lengths") {
    const std::string text =
        "series_id,day,amount\n"
        "s1,1,10\n"
        "s1,2,11\n"
        "s1,3,12\n"
        "s2,1,20\n"
        "s2,2,21\n"
        "s3,5,30\n";
    IngestConfig cfg;
    cfg.tau_max = 10;
    TrainingCorpus corpus = ingest_tables(parse_csv(text), nullptr, cfg);
    REQUIRE(corpus.series.size() == 3);
    CHECK(corpus.series[0].rows.size() == 3);
    CHECK(corpus.series[1].rows.size() == 2);
    CHECK(corpus.series[2].rows.size() == 1);
    CHECK(corpus.keys == std::vector<std::string>{"s1", "s2", "s3"});
    CHECK(corpus.schema.fields().size() == 2);
    CHECK(corpus.schema.fields()[0].kind == FieldKind::Numerical);
    CHECK(std::get<double>(corpus.series[1].rows[1].values[1]) == 21.0);
}

TEST_CASE("mixed numeric and text columns are rejected with row numbers") {
    const std::string text = "k,v\na,1\nb,2\nc,x\n";
    IngestConfig cfg;
    try {
        ingest_tables(parse_csv(text), nullptr, cfg);
        FAIL("expected MixedTypeColumn");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MixedTypeColumn);
        CHECK(std::string(e.what()).find("4") != std::string::npos);  // offending row
    }
}

TEST_CASE("empty input surfaces as structured errors") {
    IngestConfig cfg;
    CHECK_THROWS_AS(ingest_tables(parse_csv("k,v\n"), nullptr, cfg), Error);
}

TEST_CASE("date columns become day offsets from the corpus origin") {
    const std::string text =
        "k,date,amount\n"
        "a,2021-03-01,5\n"
        "a,2021-03-03,6\n"
        "a,2021-03-11,7\n";
    IngestConfig cfg;
    TrainingCorpus corpus = ingest_tables(parse_csv(text), nullptr, cfg);
    const FieldSpec& date = corpus.schema.fields()[0];
    CHECK(date.kind == FieldKind::Numerical);
    CHECK(date.date_unit == "days");
    CHECK(date.date_origin == days_from_civil(2021, 3, 1));
    CHECK(std::get<double>(corpus.series[0].rows[0].values[0]) == 0.0);
    CHECK(std::get<double>(corpus.series[0].rows[1].values[0]) == 2.0);
    CHECK(std::get<double>(corpus.series[0].rows[2].values[0]) == 10.0);

    // Rendering converts offsets back to dates.
    CHECK(render_value(10.0, date) == "2021-03-11");
    CHECK(render_value(std::string("x"), FieldSpec{.name = "c"}) == "x");
    FieldSpec plain{.name = "amount", .kind = FieldKind::Numerical};
    CHECK(render_value(35960.0, plain) == "35960");
    CHECK(render_value(3.5, plain) == "3.5");
}

TEST_CASE("civil date conversion round trips") {
    CHECK(days_from_civil(1970, 1, 1) == 0);
    CHECK(days_from_civil(2021, 3, 1) - days_from_civil(2021, 2, 28) == 1);
    for (std::int64_t day : {-700000LL, -1LL, 0LL, 1LL, 18687LL, 700000LL}) {
        int y, m, d;
        civil_from_days(day, y, m, d);
        CHECK(days_from_civil(y, m, d) == day);
    }
}

TEST_CASE("order_by sorts rows and rejects unorderable values") {
    const std::string text =
        "k,stamp,v\n"
        "a,3,30\n"
        "a,1,10\n"
        "a,2,20\n";
    IngestConfig cfg;
    cfg.order_by = "stamp";
    TrainingCorpus corpus = ingest_tables(parse_csv(text), nullptr, cfg);
    CHECK(std::get<double>(corpus.series[0].rows[0].values[1]) == 10.0);
    CHECK(std::get<double>(corpus.series[0].rows[2].values[1]) == 30.0);

    const std::string bad =
        "k,stamp,v\n"
        "a,x,30\n";
    IngestConfig cfg_text = cfg;
    cfg_text.schema_override = corpus.schema;
    try {
        ingest_tables(parse_csv(bad), nullptr, cfg_text);
        FAIL("expected UnorderableSeries");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnorderableSeries);
    }
}

TEST_CASE("long series split into consecutive windows of tau_max") {
    std::string text = "k,v\n";
    for (int i = 0; i < 7; ++i) text += "a," + std::to_string(i) + "\n";
    IngestConfig cfg;
    cfg.tau_max = 3;
    TrainingCorpus corpus = ingest_tables(parse_csv(text), nullptr, cfg);
    REQUIRE(corpus.series.size() == 3);
    CHECK(corpus.series[0].rows.size() == 3);
    CHECK(corpus.series[1].rows.size() == 3);
    CHECK(corpus.series[2].rows.size() == 1);
    CHECK(std::get<double>(corpus.series[1].rows[0].values[0]) == 3.0);
    CHECK(corpus.keys == std::vector<std::string>{"a", "a", "a"});
}

TEST_CASE("parent table aligns one row per window") {
    const std::string child =
        "k,v\n"
        "a,1\na,2\na,3\na,4\n"
        "b,9\n";
    const std::string parent =
        "k,segment\n"
        "a,gold\n"
        "b,silver\n";
    IngestConfig cfg;
    cfg.tau_max = 3;
    CsvTable parent_table = parse_csv(parent);
    TrainingCorpus corpus = ingest_tables(parse_csv(child), &parent_table, cfg);
    REQUIRE(corpus.parent_schema.has_value());
    REQUIRE(corpus.series.size() == 3);  // a split in two windows + b
    REQUIRE(corpus.parents.size() == 3);
    CHECK(std::get<std::string>(corpus.parents[0].values[0]) == "gold");
    CHECK(std::get<std::string>(corpus.parents[1].values[0]) == "gold");
    CHECK(std::get<std::string>(corpus.parents[2].values[0]) == "silver");

    const std::string orphan_child = "k,v\nc,1\n";
    try {
        ingest_tables(parse_csv(orphan_child), &parent_table, cfg);
        FAIL("expected SchemaMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaMismatch);
    }
}

TEST_CASE("numeric flags reflect observed signs and fractions") {
    const std::string text =
        "k,a,b,c\n"
        "x,1,-2,1.5\n"
        "x,2,3,2\n";
    IngestConfig cfg;
    TrainingCorpus corpus = ingest_tables(parse_csv(text), nullptr, cfg);
    CHECK_FALSE(corpus.schema.fields()[0].allows_negative);
    CHECK_FALSE(corpus.schema.fields()[0].allows_fractional);
    CHECK(corpus.schema.fields()[1].allows_negative);
    CHECK(corpus.schema.fields()[2].allows_fractional);
}

TEST_CASE("schema override bypasses inference") {
    const std::string text = "k,code\nx,1\nx,2\nx,zz\n";  // would be mixed
    FieldSpec code{.name = "code", .kind = FieldKind::Categorical, .vocabulary = {"1", "2", "zz"}};
    IngestConfig cfg;
    cfg.schema_override = Schema::make({code}, 4);
    TrainingCorpus corpus = ingest_tables(parse_csv(text), nullptr, cfg);
    CHECK(corpus.schema.fields()[0].kind == FieldKind::Categorical);
    CHECK(std::get<std::string>(corpus.series[0].rows[2].values[0]) == "zz");
}
