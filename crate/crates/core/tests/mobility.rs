use edgepriv::geometry::Area;
use edgepriv::mobility::{
    generate_synthetic, ingest_trace, MobilityType, PassengerAssignment, PopulationSpec, SyntheticSpec, TraceFormat,
};

fn population() -> PopulationSpec {
    PopulationSpec {
        cars: 30,
        buses: 4,
        passengers_per_bus: 5,
        pedestrians: 30,
    }
}

#[test]
fn synthetic_trace_respects_speed_and_street_constraints() {
    let pop = population();
    let spec = SyntheticSpec::default();
    let area = Area::default();
    let users = pop.users();
    let steps = 900;
    let trace = generate_synthetic(&pop, &spec, &area, steps, 1.0, 9).unwrap();
    assert_eq!(trace.users() as usize, users.len());
    assert_eq!(trace.steps(), steps);
    for t in 0..steps {
        for (u, user) in users.iter().enumerate() {
            let p = trace.position(t, u as u32);
            assert!(area.contains(p), "user {u} left the area at t {t}: {p:?}");
            match user.mobility {
                MobilityType::Pedestrian => assert!(spec.on_sidewalk(p), "pedestrian {u} off sidewalk at t {t}"),
                _ => assert!(spec.on_street(p), "vehicle user {u} off street at t {t}: {p:?}"),
            }
            if t > 0 {
                let step = trace.position(t - 1, u as u32).distance(p);
                assert!(
                    step <= spec.max_speed(user.mobility) + 1e-9,
                    "user {u} moved {step} m at t {t}"
                );
            }
        }
    }
}

#[test]
fn everyone_moves_at_some_point() {
    let pop = population();
    let trace = generate_synthetic(&pop, &SyntheticSpec::default(), &Area::default(), 300, 1.0, 3).unwrap();
    for u in 0..trace.users() {
        let start = trace.position(0, u);
        assert!((1..300).any(|t| trace.position(t, u) != start), "user {u} never moved");
    }
}

#[test]
fn bus_passengers_share_their_bus_position() {
    let pop = population();
    let users = pop.users();
    let trace = generate_synthetic(&pop, &SyntheticSpec::default(), &Area::default(), 120, 1.0, 4).unwrap();
    for t in 0..120 {
        for (a, ua) in users.iter().enumerate() {
            for (b, ub) in users.iter().enumerate().skip(a + 1) {
                if ua.mobility == MobilityType::BusPassenger && ua.vehicle_id == ub.vehicle_id {
                    assert_eq!(trace.position(t, a as u32), trace.position(t, b as u32));
                }
            }
        }
    }
}

#[test]
fn buses_dwell_at_stops() {
    let pop = PopulationSpec {
        cars: 0,
        buses: 3,
        passengers_per_bus: 1,
        pedestrians: 0,
    };
    let trace = generate_synthetic(&pop, &SyntheticSpec::default(), &Area::default(), 600, 1.0, 5).unwrap();
    for bus in 0..3 {
        let still = (1..600)
            .filter(|&t| trace.position(t, bus) == trace.position(t - 1, bus))
            .count();
        assert!(still >= 20, "bus {bus} stood still for only {still} s");
    }
}

#[test]
fn generation_is_seeded() {
    let pop = population();
    let spec = SyntheticSpec::default();
    let a = generate_synthetic(&pop, &spec, &Area::default(), 60, 1.0, 1).unwrap();
    assert_eq!(
        a,
        generate_synthetic(&pop, &spec, &Area::default(), 60, 1.0, 1).unwrap()
    );
    assert_ne!(
        a,
        generate_synthetic(&pop, &spec, &Area::default(), 60, 1.0, 2).unwrap()
    );
}

#[test]
fn written_trace_ingests_back_identically() {
    let pop = population();
    let area = Area::default();
    let trace = generate_synthetic(&pop, &SyntheticSpec::default(), &area, 50, 1.0, 6).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    trace.write_csv(&path).unwrap();
    let back = ingest_trace(
        &path,
        TraceFormat::PositionsCsv,
        &pop.users(),
        &PassengerAssignment::Identity,
        &area,
        1.0,
    )
    .unwrap();
    assert_eq!(back.clipped, 0);
    assert_eq!(back.trace, trace);
}

#[test]
fn fcd_xml_bus_carries_its_passengers() {
    let xml = r#"<fcd-export>
  <timestep time="0.00">
    <vehicle id="car_a" x="10.0" y="20.0" type="passenger"/>
    <vehicle id="bus_1" x="100.0" y="0.0" type="bus"/>
    <person id="walker" x="5.0" y="5.0"/>
  </timestep>
  <timestep time="1.00">
    <vehicle id="car_a" x="20.0" y="20.0" type="passenger"/>
    <vehicle id="bus_1" x="108.0" y="0.0" type="bus"/>
    <person id="walker" x="6.0" y="5.0"/>
  </timestep>
</fcd-export>"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fcd.xml");
    std::fs::write(&path, xml).unwrap();
    let pop = PopulationSpec {
        cars: 1,
        buses: 1,
        passengers_per_bus: 3,
        pedestrians: 1,
    };
    let got = ingest_trace(
        &path,
        TraceFormat::FloatingCarDataXml,
        &pop.users(),
        &PassengerAssignment::RoundRobin,
        &Area::default(),
        1.0,
    )
    .unwrap();
    let t = got.trace;
    assert_eq!((t.users(), t.steps()), (5, 2));
    for u in 1..4 {
        assert_eq!(t.position(1, u).x, 108.0);
    }
    assert_eq!(t.position(1, 0).x, 20.0);
    assert_eq!(t.position(1, 4).x, 6.0);
}
