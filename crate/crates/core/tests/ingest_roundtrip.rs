use proptest::prelude::*;
use radiant_core::geo::GeoPoint;
use radiant_core::ingest::{
    parse_cities, parse_footsteps, parse_persons, write_cities_csv, write_footsteps_csv, write_persons_csv, City, CityTable, DisciplineSet, Footstep,
    FootstepKind, Format, HistDate, Person, STANDARD_DISCIPLINES,
};

const NULLS: [&str; 6] = ["", "null", "none", "n/a", "na", "nan"];

fn text() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9 ,.'\"-]{0,15}[A-Za-z0-9]".prop_filter("null marker", |s| !NULLS.contains(&s.to_ascii_lowercase().as_str()))
}

fn point() -> impl Strategy<Value = GeoPoint> {
    (-90.0f64..=90.0, -179.999f64..=180.0).prop_map(|(lat, lon)| GeoPoint::new(lat, lon).unwrap())
}

fn date(years: std::ops::RangeInclusive<i32>) -> impl Strategy<Value = HistDate> {
    (years, 0u8..=12, 0u8..=31).prop_map(|(y, m, d)| HistDate::new(y, m, d).or_else(|| HistDate::new(y, m, 0)).unwrap_or(HistDate::year(y)))
}

fn person(id: usize) -> impl Strategy<Value = Person> {
    (
        text(),
        date(-2000..=1990),
        prop::option::of(0i32..=110),
        point(),
        text(),
        0..STANDARD_DISCIPLINES.len(),
    )
        .prop_map(move |(name, birth, life, birth_point, work_area, d)| Person {
            person_id: format!("id{id}"),
            name,
            birth_date: birth,
            death_date: life.map(|l| HistDate::year(birth.year + l + 1)),
            birth_point,
            work_area,
            discipline: DisciplineSet::standard().resolve(STANDARD_DISCIPLINES[d]).unwrap(),
        })
}

fn footstep() -> impl Strategy<Value = (String, Footstep)> {
    (
        0usize..5,
        date(1..=2100),
        text(),
        point(),
        prop::option::of(text()),
        prop::option::of(text()),
        0usize..3,
    )
        .prop_map(|(pid, date, place_name, point, predicate, place_frame, kind)| {
            let (kind, resource, frame, predicate) = match kind {
                0 => (FootstepKind::Birth, "dbpedia", "Birth", predicate),
                1 => (FootstepKind::Death, "pantheon", "Death", predicate),
                _ => (FootstepKind::InLife, "FrameNet", "Motion", Some(predicate.unwrap_or_else(|| "moved".into()))),
            };
            (
                format!("id{pid}"),
                Footstep {
                    date,
                    place_name,
                    point,
                    kind,
                    predicate,
                    resource: resource.into(),
                    place_frame,
                    resource_frame: frame.into(),
                },
            )
        })
}

fn cities() -> impl Strategy<Value = Vec<City>> {
    prop::collection::vec((text(), point(), 1.0f64..1e8), 1..20).prop_map(|rows| {
        let mut seen = std::collections::HashSet::new();
        rows.into_iter()
            .enumerate()
            .filter(|(_, (_, p, _))| seen.insert((p.lat.to_bits(), p.lon.to_bits())))
            .map(|(k, (name, point, population))| City {
                city_id: format!("c{k}"),
                name,
                point,
                population,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn persons_round_trip(persons in (1usize..12).prop_flat_map(|n| (0..n).map(person).collect::<Vec<_>>())) {
        let mut buf = Vec::new();
        write_persons_csv(&mut buf, &persons).unwrap();
        let parsed = parse_persons(buf.as_slice(), Format::Csv, &DisciplineSet::standard()).unwrap();
        prop_assert!(parsed.rejections.is_empty(), "{:?}", parsed.rejections);
        prop_assert_eq!(parsed.accepted, persons);
    }

    #[test]
    fn footsteps_round_trip(steps in prop::collection::vec(footstep(), 0..30)) {
        let mut buf = Vec::new();
        write_footsteps_csv(&mut buf, steps.iter().map(|(p, f)| (p.as_str(), f))).unwrap();
        let parsed = parse_footsteps(buf.as_slice(), Format::Csv).unwrap();
        prop_assert!(parsed.rejections.is_empty(), "{:?}", parsed.rejections);
        prop_assert_eq!(parsed.accepted, steps);
    }

    #[test]
    fn cities_round_trip(cities in cities()) {
        let table = CityTable { cities };
        let mut buf = Vec::new();
        write_cities_csv(&mut buf, &table).unwrap();
        let parsed = parse_cities(buf.as_slice(), Format::Csv).unwrap();
        prop_assert!(parsed.rejections.is_empty(), "{:?}", parsed.rejections);
        prop_assert_eq!(parsed.accepted, table.cities);
    }
}
