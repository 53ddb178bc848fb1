use super::{Bus, Network};

/// Collapses each area to a single bus named after the area. Intra-area lines
/// are dropped, inter-area lines keep their parameters, and demand, units and
/// wind farms move to their area's bus. A network that already has one bus
/// per area is returned unchanged.
pub fn two_zone_reduction(network: &Network) -> Network {
    let mut per_area = vec![0usize; network.areas.len()];
    for b in &network.buses {
        per_area[b.area] += 1;
    }
    if per_area.iter().all(|&c| c == 1) {
        return network.clone();
    }
    let buses: Vec<Bus> = network
        .areas
        .iter()
        .enumerate()
        .map(|(a, area)| Bus {
            id: area.id.clone(),
            area: a,
            demand: network
                .buses
                .iter()
                .filter(|b| b.area == a)
                .map(|b| b.demand)
                .sum(),
        })
        .collect();
    let zone = |bus: usize| network.buses[bus].area;

    let mut net = network.clone();
    net.buses = buses;
    for u in &mut net.units {
        u.bus = zone(u.bus);
    }
    for w in &mut net.wind_farms {
        w.bus = zone(w.bus);
    }
    net.lines = network
        .lines
        .iter()
        .filter(|l| zone(l.from) != zone(l.to))
        .map(|l| {
            let mut l = l.clone();
            l.from = zone(l.from);
            l.to = zone(l.to);
            l
        })
        .collect();
    net.reference_bus = zone(network.reference_bus);
    net
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{Area, DispatchableUnit, Line, LineKind, Technology};

    fn line(id: &str, from: usize, to: usize, kind: LineKind) -> Line {
        Line {
            id: id.into(),
            from,
            to,
            kind,
            f_max: 100.0,
            susceptance: if kind == LineKind::Ac { 10.0 } else { 0.0 },
            x_share: 0.0,
        }
    }

    fn three_area() -> Network {
        // areas: a0 = {0, 1}, a1 = {2, 3}, a2 = {4}
        let area_of = [0, 0, 1, 1, 2];
        Network {
            name: "three".into(),
            areas: (0..3).map(|a| Area { id: format!("a{a}") }).collect(),
            buses: area_of
                .iter()
                .enumerate()
                .map(|(i, &a)| Bus { id: format!("b{i}"), area: a, demand: 10.0 * (i + 1) as f64 })
                .collect(),
            units: (0..5)
                .map(|i| DispatchableUnit {
                    id: format!("u{i}"),
                    bus: i,
                    technology: Technology::Ccgt,
                    p_max: 50.0 + i as f64,
                    cost: 20.0,
                    reserve_up_max: 0.0,
                    reserve_down_max: 0.0,
                    reserve_up_cost: 0.0,
                    reserve_down_cost: 0.0,
                })
                .collect(),
            wind_farms: vec![],
            lines: vec![
                line("intra0", 0, 1, LineKind::Ac),
                line("intra1", 2, 3, LineKind::Ac),
                line("tie01", 1, 2, LineKind::Dc),
                line("tie12", 3, 4, LineKind::Ac),
                line("tie02", 0, 4, LineKind::Dc),
            ],
            reference_bus: 1,
            voll: 1000.0,
        }
    }

    #[test]
    fn three_areas_keep_only_ties() {
        let net = three_area();
        assert!(net.validate().is_ok());
        let z = two_zone_reduction(&net);
        assert_eq!(z.buses.len(), 3);
        let ids: Vec<&str> = z.lines.iter().map(|l| l.id.as_str()).collect();
        assert_eq!(ids, ["tie01", "tie12", "tie02"]);
        assert_eq!((z.lines[1].from, z.lines[1].to), (1, 2));
        assert_eq!(z.reference_bus, 0);
        assert!(z.validate().is_ok());
    }

    #[test]
    fn totals_preserved() {
        let net = three_area();
        let z = two_zone_reduction(&net);
        assert_eq!(z.total_demand(), net.total_demand());
        assert_eq!(z.total_unit_capacity(), net.total_unit_capacity());
        assert_eq!(z.buses[1].demand, 30.0 + 40.0);
    }

    #[test]
    fn zonal_network_is_unchanged() {
        let z = two_zone_reduction(&three_area());
        assert_eq!(two_zone_reduction(&z), z);
    }
}
