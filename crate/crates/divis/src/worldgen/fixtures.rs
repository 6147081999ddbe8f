//! Hand-authored environment fixtures: six seen (training) rooms and
//! four unseen (evaluation-only) rooms, 8-15 m across.

use super::{build_environment, Bounds, Environment, GoalObject, Obstacle, Split, WorldError};
use crate::geom::{Segment, Shape, Vec2};

/// Width of the narrowest corridor in the `office` fixture, formed by
/// the two desks either side of the gate at x in [5.0, 5.6],
/// y in [5.0, 5.9].
pub const OFFICE_MIN_CORRIDOR: f64 = 0.9;

/// Bounding box of the office pinch gate, `(x0, y0, x1, y1)`.
pub const OFFICE_PINCH: (f64, f64, f64, f64) = (5.0, 5.0, 5.6, 5.9);

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Shape {
    Shape::Polygon {
        points: vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ],
    }
}

fn circle(x: f64, y: f64, r: f64) -> Shape {
    Shape::Circle {
        center: Vec2::new(x, y),
        radius: r,
    }
}

fn obstacle(shape: Shape, category: &str) -> Obstacle {
    Obstacle {
        shape,
        category: category.to_string(),
    }
}

fn goal(x: f64, y: f64, r: f64, category: &str, instance: &str) -> GoalObject {
    GoalObject {
        position: Vec2::new(x, y),
        radius: r,
        category: category.to_string(),
        instance_id: instance.to_string(),
    }
}

fn studio() -> Result<Environment, WorldError> {
    build_environment(
        "studio",
        Bounds::new(10.0, 10.0),
        Vec::new(),
        vec![
            obstacle(circle(3.0, 3.0, 0.6), "table"),
            obstacle(circle(7.0, 4.0, 0.5), "stool"),
            obstacle(rect(2.0, 6.5, 4.0, 7.3), "sofa"),
        ],
        vec![
            goal(8.5, 8.5, 0.15, "chair", "studio_chair_0"),
            goal(1.2, 8.4, 0.15, "plant", "studio_plant_0"),
            goal(8.8, 1.2, 0.12, "ball", "studio_ball_0"),
        ],
    )
}

fn lounge() -> Result<Environment, WorldError> {
    build_environment(
        "lounge",
        Bounds::new(12.0, 9.0),
        Vec::new(),
        vec![
            obstacle(rect(4.0, 3.5, 6.5, 4.5), "couch"),
            obstacle(circle(9.0, 5.5, 0.6), "table"),
            obstacle(circle(2.5, 2.0, 0.5), "stool"),
            obstacle(rect(7.5, 1.0, 8.3, 2.6), "cabinet"),
        ],
        vec![
            goal(10.8, 7.6, 0.15, "teddy_bear", "lounge_teddy_0"),
            goal(1.0, 7.8, 0.12, "lamp", "lounge_lamp_0"),
            goal(11.0, 1.2, 0.15, "suitcase", "lounge_suitcase_0"),
        ],
    )
}

/// Confined office: 12 obstacles, narrowest corridor 0.9 m wide at the
/// gate between the two tall desks.
fn office() -> Result<Environment, WorldError> {
    build_environment(
        "office",
        Bounds::new(12.0, 10.0),
        Vec::new(),
        vec![
            obstacle(rect(5.0, 2.0, 5.6, 5.0), "desk"),
            obstacle(rect(5.0, 5.9, 5.6, 8.0), "desk"),
            obstacle(rect(1.5, 1.5, 3.0, 2.3), "desk"),
            obstacle(rect(1.5, 7.5, 3.0, 8.3), "desk"),
            obstacle(rect(8.5, 1.5, 10.5, 2.2), "desk"),
            obstacle(rect(8.5, 7.8, 10.5, 8.5), "desk"),
            obstacle(circle(2.2, 4.9, 0.4), "chair"),
            obstacle(circle(8.0, 5.0, 0.45), "chair"),
            obstacle(circle(10.3, 4.0, 0.35), "chair"),
            obstacle(circle(3.4, 6.4, 0.35), "chair"),
            obstacle(circle(7.0, 6.9, 0.35), "chair"),
            obstacle(circle(7.2, 2.8, 0.4), "chair"),
        ],
        vec![
            goal(11.2, 9.2, 0.15, "chair", "office_chair_0"),
            goal(1.0, 5.2, 0.18, "toilet", "office_toilet_0"),
            goal(0.8, 0.8, 0.15, "plant", "office_plant_0"),
        ],
    )
}

/// L-shaped room: a block fills the lower-right quadrant (inset a hair
/// so it stays strictly inside bounds). Either goal is visible from
/// every free point.
fn lshape() -> Result<Environment, WorldError> {
    build_environment(
        "lshape",
        Bounds::new(10.0, 10.0),
        Vec::new(),
        vec![obstacle(rect(5.0, 0.05, 9.95, 5.0), "block")],
        vec![
            goal(1.5, 2.5, 0.12, "ball", "lshape_ball_0"),
            goal(2.5, 8.5, 0.15, "plant", "lshape_plant_0"),
        ],
    )
}

/// Empty straight corridor with a goal at each end.
fn corridor_hall() -> Result<Environment, WorldError> {
    build_environment(
        "corridor_hall",
        Bounds::new(12.0, 4.0),
        Vec::new(),
        Vec::new(),
        vec![
            goal(11.0, 2.0, 0.15, "suitcase", "corridor_suitcase_0"),
            goal(1.0, 2.0, 0.12, "ball", "corridor_ball_0"),
        ],
    )
}

fn atrium() -> Result<Environment, WorldError> {
    build_environment(
        "atrium",
        Bounds::new(14.0, 10.0),
        Vec::new(),
        vec![
            obstacle(circle(4.0, 3.3, 0.5), "pillar"),
            obstacle(circle(4.0, 6.7, 0.5), "pillar"),
            obstacle(circle(9.0, 3.3, 0.5), "pillar"),
            obstacle(circle(9.0, 6.7, 0.5), "pillar"),
            obstacle(rect(6.0, 4.6, 7.0, 5.4), "bench"),
        ],
        vec![
            goal(12.8, 8.8, 0.15, "plant", "atrium_plant_0"),
            goal(12.8, 1.2, 0.15, "chair", "atrium_chair_0"),
            goal(1.2, 5.0, 0.15, "teddy_bear", "atrium_teddy_0"),
        ],
    )
}

fn den() -> Result<Environment, WorldError> {
    build_environment(
        "den",
        Bounds::new(8.0, 8.0),
        Vec::new(),
        vec![
            obstacle(rect(3.0, 3.0, 5.0, 4.0), "couch"),
            obstacle(circle(5.8, 5.8, 0.45), "table"),
        ],
        vec![
            goal(1.0, 6.8, 0.15, "teddy_bear", "den_teddy_0"),
            goal(7.0, 1.0, 0.12, "lamp", "den_lamp_0"),
        ],
    )
}

fn workshop() -> Result<Environment, WorldError> {
    build_environment(
        "workshop",
        Bounds::new(11.0, 11.0),
        Vec::new(),
        vec![
            obstacle(rect(2.0, 2.0, 4.5, 2.8), "bench"),
            obstacle(rect(6.5, 8.0, 9.0, 8.8), "bench"),
            obstacle(circle(5.5, 5.5, 0.6), "machine"),
            obstacle(circle(8.5, 3.0, 0.5), "drum"),
        ],
        vec![
            goal(10.0, 10.0, 0.15, "suitcase", "workshop_suitcase_0"),
            goal(1.0, 10.0, 0.18, "toilet", "workshop_toilet_0"),
            goal(1.2, 1.2, 0.15, "chair", "workshop_chair_0"),
        ],
    )
}

/// Long gallery with two partial interior walls and offset passages.
fn gallery() -> Result<Environment, WorldError> {
    build_environment(
        "gallery",
        Bounds::new(15.0, 8.0),
        vec![
            Segment::new(Vec2::new(5.0, 0.0), Vec2::new(5.0, 5.5)),
            Segment::new(Vec2::new(10.0, 2.5), Vec2::new(10.0, 8.0)),
        ],
        Vec::new(),
        vec![
            goal(13.5, 6.5, 0.15, "plant", "gallery_plant_0"),
            goal(2.0, 6.0, 0.12, "ball", "gallery_ball_0"),
            goal(7.5, 1.0, 0.12, "lamp", "gallery_lamp_0"),
        ],
    )
}

fn loft() -> Result<Environment, WorldError> {
    build_environment(
        "loft",
        Bounds::new(10.0, 12.0),
        Vec::new(),
        vec![
            obstacle(circle(3.0, 8.0, 0.5), "table"),
            obstacle(rect(5.5, 4.0, 6.3, 7.0), "divider"),
            obstacle(circle(7.5, 9.5, 0.45), "stool"),
            obstacle(rect(2.0, 3.0, 3.5, 3.8), "cabinet"),
        ],
        vec![
            goal(8.8, 1.2, 0.15, "chair", "loft_chair_0"),
            goal(1.0, 11.0, 0.12, "lamp", "loft_lamp_0"),
            goal(8.8, 11.0, 0.15, "teddy_bear", "loft_teddy_0"),
        ],
    )
}

pub const SEEN_IDS: [&str; 6] = [
    "studio",
    "lounge",
    "office",
    "lshape",
    "corridor_hall",
    "atrium",
];
pub const UNSEEN_IDS: [&str; 4] = ["den", "workshop", "gallery", "loft"];

pub fn all() -> Vec<Environment> {
    let mut envs = seen();
    envs.extend(unseen());
    envs
}

pub fn seen() -> Vec<Environment> {
    vec![
        studio().expect("studio fixture"),
        lounge().expect("lounge fixture"),
        office().expect("office fixture"),
        lshape().expect("lshape fixture"),
        corridor_hall().expect("corridor_hall fixture"),
        atrium().expect("atrium fixture"),
    ]
}

pub fn unseen() -> Vec<Environment> {
    vec![
        den().expect("den fixture"),
        workshop().expect("workshop fixture"),
        gallery().expect("gallery fixture"),
        loft().expect("loft fixture"),
    ]
}

pub fn by_id(id: &str) -> Option<Environment> {
    all().into_iter().find(|e| e.id == id)
}

pub fn split_of(id: &str) -> Option<Split> {
    if SEEN_IDS.contains(&id) {
        Some(Split::Seen)
    } else if UNSEEN_IDS.contains(&id) {
        Some(Split::Unseen)
    } else {
        None
    }
}
