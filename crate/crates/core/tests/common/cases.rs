//! Shared SQL cases and a random query generator over concert_singer.

use actsql::schema::DatabaseSchema;
use proptest::prelude::*;

/// (source_id, linked columns, FROM-only tables, values), checked by hand against the SQL.
/// (source_id, linked columns, FROM-only tables, values).
pub type SummaryRow = (&'static str, &'static [&'static str], &'static [&'static str], &'static [&'static str]);

pub const SUMMARY_TABLE: &[SummaryRow] = &[
    ("train-0", &["ACCOUNTS.name", "SAVINGS.balance"], &[], &["3"]),
    ("train-1", &["flight.destination"], &[], &["1"]),
    ("train-2", &["Has_amenity.dormid"], &[], &[]),
    ("train-3", &[], &["Dorm_amenity"], &[]),
    ("train-4", &["Faculty.Sex", "Faculty.Rank"], &[], &["F", "Professor"]),
    ("train-5", &["party.Party_name"], &[], &[]),
    ("train-6", &["TV_Channel.Package_Option", "TV_Channel.series_name", "TV_Channel.Hight_definition_TV"], &[], &["yes"]),
    ("train-7", &["flight.origin"], &[], &["1"]),
    ("train-8", &["CHECKING.balance", "ACCOUNTS.name"], &[], &["%ee%"]),
    ("train-9", &["aircraft.name", "aircraft.distance"], &[], &["5000"]),
    ("train-10", &["flight.price", "flight.origin", "flight.destination"], &[], &["Los Angeles", "Honolulu"]),
    ("train-11", &["employee.name", "aircraft.name"], &["certificate"], &["Boeing 737-800"]),
    ("train-12", &["employee.eid", "certificate.eid"], &[], &[]),
    ("train-13", &["Dorm.dorm_name", "Dorm.student_capacity"], &[], &["300"]),
    ("train-14", &["Dorm.dorm_name"], &["Lives_in"], &[]),
    ("train-15", &["Activity.activity_name"], &["Participates_in"], &["1"]),
    ("train-16", &["Faculty.Fname", "Activity.activity_name"], &["Faculty_Participates_in"], &["Canoeing", "Kayaking"]),
    ("train-17", &["party.Minister", "party.Took_office"], &[], &["1961", "1959"]),
    ("train-18", &["member.Member_Name"], &["party_events"], &[]),
    ("train-19", &["TV_Channel.Country", "Cartoon.Written_by"], &[], &["Todd Casey"]),
    ("dev-0", &[], &["singer"], &[]),
    ("dev-1", &["stadium.Name", "stadium.Stadium_ID", "concert.Stadium_ID"], &[], &[]),
    ("dev-2", &["singer.Song_Name", "singer.Song_release_year", "singer.Age"], &[], &["1"]),
    ("dev-3", &["singer.Country"], &[], &[]),
    ("dev-4", &["stadium.Name"], &["concert"], &[]),
    ("dev-5", &["singer.Country", "singer.Age"], &[], &["40", "30"]),
    ("dev-6", &["singer.Name", "singer.Citizenship"], &[], &["France"]),
    ("dev-7", &["singer.Name", "singer.Net_Worth_Millions"], &[], &[]),
    ("dev-8", &["flights.FlightNo", "airports.City"], &[], &["Aberdeen"]),
    ("dev-9", &["airlines.Country"], &[], &["USA"]),
];

pub const EM_PAIRS: &[(&str, &str, &str, bool)] = &[
    // Values are masked: the wrong literal still counts as an exact match.
    ("singer", "SELECT Name FROM singer WHERE Citizenship != 'French'", "SELECT Name FROM singer WHERE Citizenship != 'France'", true),
    // Literal compared against the wrong column instead of joining.
    (
        "flight_2",
        "SELECT FlightNo FROM flights WHERE SourceAirport = 'Aberdeen'",
        "SELECT T1.FlightNo FROM FLIGHTS AS T1 JOIN AIRPORTS AS T2 ON T1.SourceAirport  =  T2.AirportCode WHERE T2.City  =  \"Aberdeen\"",
        false,
    ),
    // Nested IN is a different structure from the join, though it executes the same.
    (
        "flight_2",
        "SELECT FlightNo FROM flights WHERE SourceAirport IN (SELECT AirportCode FROM airports WHERE City = 'Aberdeen')",
        "SELECT T1.FlightNo FROM FLIGHTS AS T1 JOIN AIRPORTS AS T2 ON T1.SourceAirport  =  T2.AirportCode WHERE T2.City  =  \"Aberdeen\"",
        false,
    ),
    (
        "concert_singer",
        "SELECT s.name, count(*) FROM concert AS c JOIN stadium AS s ON c.stadium_id = s.stadium_id GROUP BY c.stadium_id",
        "SELECT T2.name ,  count(*) FROM concert AS T1 JOIN stadium AS T2 ON T1.stadium_id  =  T2.stadium_id GROUP BY T1.stadium_id",
        true,
    ),
    (
        "concert_singer",
        "SELECT song_release_year, song_name FROM singer ORDER BY age LIMIT 1",
        "SELECT song_name ,  song_release_year FROM singer ORDER BY age LIMIT 1",
        true,
    ),
    ("concert_singer", "SELECT song_name FROM singer ORDER BY age LIMIT 3", "SELECT song_name FROM singer ORDER BY age LIMIT 1", true),
    ("concert_singer", "SELECT song_name FROM singer ORDER BY age", "SELECT song_name FROM singer ORDER BY age LIMIT 1", false),
    (
        "concert_singer",
        "SELECT song_name FROM singer ORDER BY age DESC LIMIT 1",
        "SELECT song_name FROM singer ORDER BY age LIMIT 1",
        false,
    ),
    ("singer", "SELECT Name FROM singer ORDER BY Net_Worth_Millions", "SELECT Name FROM singer ORDER BY Net_Worth_Millions ASC", true),
    (
        "activity_1",
        "SELECT count(*) FROM Faculty WHERE Rank = 'Professor' AND Sex = 'F'",
        "SELECT count(*) FROM Faculty WHERE Sex  =  'F' AND Rank  =  \"Professor\"",
        true,
    ),
    ("concert_singer", "SELECT name FROM singer WHERE 40 < age", "SELECT name FROM singer WHERE age > 40", true),
    ("singer", "SELECT Name FROM singer WHERE Citizenship <> 'France'", "SELECT Name FROM singer WHERE Citizenship != 'France'", true),
    ("singer", "SELECT Name FROM singer WHERE Birth_Year != 1949", "SELECT Name FROM singer WHERE Citizenship != 'France'", false),
    ("concert_singer", "SELECT count(Singer_ID) FROM singer", "SELECT count(*) FROM singer", false),
    ("concert_singer", "SELECT DISTINCT country FROM singer", "SELECT country FROM singer", false),
    (
        "concert_singer",
        "SELECT country FROM singer WHERE age > 40 UNION SELECT country FROM singer WHERE age < 30",
        "SELECT country FROM singer WHERE age  >  40 INTERSECT SELECT country FROM singer WHERE age  <  30",
        false,
    ),
    (
        "concert_singer",
        "SELECT T1.name, count(*) FROM stadium AS T1 JOIN concert AS T2 ON T1.stadium_id = T2.stadium_id GROUP BY T2.stadium_id",
        "SELECT T2.name ,  count(*) FROM concert AS T1 JOIN stadium AS T2 ON T1.stadium_id  =  T2.stadium_id GROUP BY T1.stadium_id",
        true,
    ),
    ("concert_singer", "select COUNT(*) from SINGER", "SELECT count(*) FROM singer", true),
    ("flight_2", "SELECT count(*) FROM AIRLINES WHERE Country = 'USA'", "SELECT count(*) FROM AIRLINES WHERE Country  =  \"USA\"", true),
    (
        "party_people",
        "SELECT minister FROM party WHERE took_office > 1961 AND took_office < 1959",
        "SELECT minister FROM party WHERE took_office  >  1961 OR took_office  <  1959",
        false,
    ),
    (
        "concert_singer",
        "SELECT country, count(*) FROM singer GROUP BY name",
        "SELECT country ,  count(*) FROM singer GROUP BY country",
        false,
    ),
    ("concert_singer", "SELECT count(*) FROM singer WHERE age > 20", "SELECT count(*) FROM singer", false),
    ("concert_singer", "SELECT FROM singer", "SELECT count(*) FROM singer", false),
];

#[derive(Debug, Clone)]
pub enum Lit {
    Num(i64),
    Str(String),
}

impl Lit {
    pub fn sql(&self) -> String {
        match self {
            Lit::Num(n) => n.to_string(),
            Lit::Str(s) => format!("'{s}'"),
        }
    }
}

pub fn lit_strategy() -> impl Strategy<Value = Lit> {
    prop_oneof![(-500i64..5000).prop_map(Lit::Num), "[A-Za-z][A-Za-z ]{0,8}".prop_map(Lit::Str)]
}

/// Columns allowed outside GROUP BY and ON, by join shape.
const SINGER_COLS: &[&str] = &["Name", "Country", "Song_Name", "Song_release_year", "Age"];
const JOINED_COLS: &[&str] = &["T1.concert_Name", "T1.Year", "T2.Location", "T2.Name", "T2.Capacity", "T2.Average"];

#[derive(Debug, Clone)]
pub struct Generated {
    joined: bool,
    distinct: bool,
    items: Vec<(usize, Option<&'static str>)>,
    conds: Vec<(usize, &'static str, usize)>,
    connectors: Vec<bool>,
    group: bool,
    having: Option<usize>,
    order: Option<(usize, bool)>,
    limit: Option<u8>,
}

impl Generated {
    pub fn cols(&self) -> &'static [&'static str] {
        if self.joined {
            JOINED_COLS
        } else {
            SINGER_COLS
        }
    }

    /// SQL text with `{}` placeholders for the literals, in order.
    pub fn template(&self) -> (String, usize) {
        let cols = self.cols();
        let mut lits = 0;
        let items: Vec<String> = self
            .items
            .iter()
            .map(|(c, agg)| match agg {
                Some(a) => format!("{a}({})", cols[c % cols.len()]),
                None => cols[c % cols.len()].to_string(),
            })
            .collect();
        let mut sql = format!("SELECT {}{}", if self.distinct { "DISTINCT " } else { "" }, items.join(", "));
        sql.push_str(if self.joined { " FROM concert AS T1 JOIN stadium AS T2 ON T1.Stadium_ID = T2.Stadium_ID" } else { " FROM singer" });
        for (i, (c, op, _)) in self.conds.iter().enumerate() {
            sql.push_str(if i == 0 {
                " WHERE "
            } else if self.connectors[i - 1] {
                " AND "
            } else {
                " OR "
            });
            let col = cols[c % cols.len()];
            match *op {
                "between" => {
                    sql.push_str(&format!("{col} BETWEEN {{}} AND {{}}"));
                    lits += 2;
                }
                "in" => {
                    sql.push_str(&format!("{col} IN ({{}}, {{}})"));
                    lits += 2;
                }
                "like" => {
                    sql.push_str(&format!("{col} LIKE {{}}"));
                    lits += 1;
                }
                op => {
                    sql.push_str(&format!("{col} {op} {{}}"));
                    lits += 1;
                }
            }
        }
        if self.group {
            sql.push_str(if self.joined { " GROUP BY T1.Theme" } else { " GROUP BY Is_male" });
            if let Some(c) = self.having {
                sql.push_str(&format!(" HAVING count({}) > {{}}", cols[c % cols.len()]));
                lits += 1;
            }
        }
        if let Some((c, desc)) = self.order {
            sql.push_str(&format!(" ORDER BY {}{}", cols[c % cols.len()], if desc { " DESC" } else { "" }));
            if let Some(n) = self.limit {
                sql.push_str(&format!(" LIMIT {n}"));
            }
        }
        (sql, lits)
    }
}

pub fn fill(template: &str, lits: &[Lit]) -> String {
    let mut out = String::new();
    let mut parts = template.split("{}");
    out.push_str(parts.next().unwrap());
    for (part, l) in parts.zip(lits) {
        out.push_str(&l.sql());
        out.push_str(part);
    }
    out
}

pub fn generated() -> impl Strategy<Value = Generated> {
    let op = prop_oneof![Just("="), Just("!="), Just(">"), Just("<"), Just(">="), Just("<="), Just("like"), Just("between"), Just("in")];
    let agg = prop_oneof![Just(None), Just(Some("count")), Just(Some("max")), Just(Some("min")), Just(Some("avg"))];
    (
        any::<bool>(),
        any::<bool>(),
        prop::collection::vec((0usize..8, agg), 1..4),
        prop::collection::vec((0usize..8, op, 0usize..1), 0..4),
        prop::collection::vec(any::<bool>(), 3),
        any::<bool>(),
        prop::option::of(0usize..8),
        prop::option::of((0usize..8, any::<bool>())),
        prop::option::of(1u8..10),
    )
        .prop_map(|(joined, distinct, items, conds, connectors, group, having, order, limit)| Generated {
            joined,
            distinct,
            items,
            conds,
            connectors,
            group,
            having,
            order,
            limit,
        })
}

pub fn with_literals() -> impl Strategy<Value = (Generated, Vec<Lit>, Vec<Lit>)> {
    generated().prop_flat_map(|g| {
        let n = g.template().1;
        (Just(g), prop::collection::vec(lit_strategy(), n), prop::collection::vec(lit_strategy(), n))
    })
}

pub fn concert_singer() -> DatabaseSchema {
    super::catalog().get("concert_singer").unwrap().clone()
}

pub const SHOP: &str = "
CREATE TABLE customer (id int primary key, name text, city text, age int);
CREATE TABLE product (id int primary key, title text, price real);
CREATE TABLE orders (id int primary key, customer_id int, product_id int, qty int);
CREATE TABLE review (id int primary key, product_id int, stars int, note text);
INSERT INTO customer VALUES (1, 'Ann', 'Oslo', 30), (2, 'Bob', 'Rome', 41), (3, 'Cid', 'Oslo', NULL), (4, 'Dee', 'Lima', 25);
INSERT INTO product VALUES (1, 'pen', 1.5), (2, 'ink', 2.25), (3, 'pad', 4.0);
INSERT INTO orders VALUES (1, 1, 1, 2), (2, 1, 2, 1), (3, 2, 1, 5), (4, 4, 3, 1), (5, 2, 1, 1);
INSERT INTO review VALUES (1, 1, 5, 'good'), (2, 1, 4, NULL), (3, 3, 2, 'meh');
";

/// (prediction, gold, expected EX verdict)
pub const EX_CASES: &[(&str, &str, bool)] = &[
    // Aliases do not matter.
    ("SELECT c.name FROM customer AS c WHERE c.age > 28", "SELECT name FROM customer WHERE age > 28", true),
    // Columns are compared by position.
    ("SELECT city, name FROM customer", "SELECT name, city FROM customer", false),
    // Without ORDER BY in gold, row order is ignored.
    ("SELECT name FROM customer ORDER BY name DESC", "SELECT name FROM customer", true),
    // With ORDER BY in gold, row order matters.
    ("SELECT name FROM customer WHERE age IS NOT NULL ORDER BY age DESC", "SELECT name FROM customer WHERE age IS NOT NULL ORDER BY age", false),
    // Duplicates count.
    ("SELECT DISTINCT city FROM customer", "SELECT city FROM customer", false),
    // Integers and reals compare numerically.
    ("SELECT 10.0", "SELECT sum(qty) FROM orders", true),
    // Relative float tolerance.
    ("SELECT sum(price) / 3 FROM product", "SELECT avg(price) FROM product", true),
    // NULL equals only NULL.
    ("SELECT 0", "SELECT age FROM customer WHERE name = 'Cid'", false),
    ("SELECT NULL", "SELECT age FROM customer WHERE name = 'Cid'", true),
    ("SELECT count(age) FROM customer", "SELECT count(*) FROM customer", false),
    // A join and a nested IN with the same result.
    (
        "SELECT name FROM customer WHERE id IN (SELECT customer_id FROM orders WHERE product_id = 1)",
        "SELECT DISTINCT T1.name FROM customer AS T1 JOIN orders AS T2 ON T1.id = T2.customer_id JOIN product AS T3 ON T2.product_id = T3.id WHERE T3.title = 'pen'",
        true,
    ),
    ("SELECT name FROM", "SELECT name FROM customer", false),
    ("SELECT nickname FROM customer", "SELECT name FROM customer", false),
];
