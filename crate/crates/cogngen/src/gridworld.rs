//! Partially observable grid tasks with sparse terminal reward.
//!
//! Five tasks share one engine: an empty 6x6 room with a random start pose
//! (`R6x6`), a procedurally chained three-room maze (`MR`), a two-room
//! key/locked-door unlocking task (`Unl`), the classic 6x6 door-key task
//! (`DK`), and a cue/recall memory task (`Mem`) where the agent must walk to
//! the object matching the one it saw at spawn.
//!
//! The agent perceives a 7x7 egocentric view (facing "up" in view
//! coordinates, standing at the bottom-center cell) with line-of-sight
//! occlusion; walls and shut doors hide what lies behind them. Views encode
//! to a 147-element vector in `[0, 1]`: three channels per cell (object,
//! color, door-state) divided by their maxima (10, 5, 2).
//!
//! Six actions: turn left/right, move forward, pick up, drop, toggle.
//! Illegal moves are silent no-ops. Rewards are strictly sparse: `1.0`
//! exactly once on success, otherwise `0.0`.

use ndarray::Array1;
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::ngc::{cast, Scalar};
use crate::{Error, Result};

pub const VIEW: usize = 7;
pub const ENCODED_DIM: usize = VIEW * VIEW * 3;
pub const N_ACTIONS: usize = 6;

/// Object channel codes.
pub mod obj {
    pub const UNSEEN: u8 = 0;
    pub const EMPTY: u8 = 1;
    pub const WALL: u8 = 2;
    pub const FLOOR: u8 = 3;
    pub const DOOR: u8 = 4;
    pub const KEY: u8 = 5;
    pub const BALL: u8 = 6;
    pub const BOX: u8 = 7;
    pub const GOAL: u8 = 8;
    pub const LAVA: u8 = 9;
    pub const AGENT: u8 = 10;
    pub const MAX: u8 = 10;
}

/// Color channel codes.
pub mod color {
    pub const RED: u8 = 0;
    pub const GREEN: u8 = 1;
    pub const BLUE: u8 = 2;
    pub const PURPLE: u8 = 3;
    pub const YELLOW: u8 = 4;
    pub const GREY: u8 = 5;
    pub const MAX: u8 = 5;
}

/// Door-state channel codes.
pub mod door {
    pub const OPEN: u8 = 0;
    pub const CLOSED: u8 = 1;
    pub const LOCKED: u8 = 2;
    pub const MAX: u8 = 2;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub obj: u8,
    pub color: u8,
    pub state: u8,
}

impl Tile {
    pub const UNSEEN: Tile = Tile {
        obj: obj::UNSEEN,
        color: 0,
        state: 0,
    };
    pub const EMPTY: Tile = Tile {
        obj: obj::EMPTY,
        color: 0,
        state: 0,
    };
    pub const WALL: Tile = Tile {
        obj: obj::WALL,
        color: color::GREY,
        state: 0,
    };

    pub fn goal() -> Tile {
        Tile {
            obj: obj::GOAL,
            color: color::GREEN,
            state: 0,
        }
    }

    pub fn door(c: u8, state: u8) -> Tile {
        Tile {
            obj: obj::DOOR,
            color: c,
            state,
        }
    }

    pub fn key(c: u8) -> Tile {
        Tile {
            obj: obj::KEY,
            color: c,
            state: 0,
        }
    }

    pub fn ball(c: u8) -> Tile {
        Tile {
            obj: obj::BALL,
            color: c,
            state: 0,
        }
    }

    pub fn can_overlap(&self) -> bool {
        matches!(self.obj, obj::EMPTY | obj::FLOOR | obj::GOAL)
            || (self.obj == obj::DOOR && self.state == door::OPEN)
    }

    pub fn can_pickup(&self) -> bool {
        matches!(self.obj, obj::KEY | obj::BALL | obj::BOX)
    }

    pub fn see_behind(&self) -> bool {
        self.obj != obj::WALL && !(self.obj == obj::DOOR && self.state != door::OPEN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "r6x6")]
    R6x6,
    #[serde(rename = "mr")]
    MR,
    #[serde(rename = "unl")]
    Unl,
    #[serde(rename = "dk")]
    DK,
    #[serde(rename = "mem")]
    Mem,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::R6x6, Task::MR, Task::Unl, Task::DK, Task::Mem];

    pub fn max_steps(&self) -> u32 {
        match self {
            Task::R6x6 => 60,
            Task::MR => 240,
            Task::Unl => 288,
            Task::DK => 360,
            Task::Mem => 100,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Task::R6x6 => "r6x6",
            Task::MR => "mr",
            Task::Unl => "unl",
            Task::DK => "dk",
            Task::Mem => "mem",
        };
        f.write_str(s)
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Task> {
        match s.to_ascii_lowercase().as_str() {
            "r6x6" => Ok(Task::R6x6),
            "mr" => Ok(Task::MR),
            "unl" => Ok(Task::Unl),
            "dk" => Ok(Task::DK),
            "mem" => Ok(Task::Mem),
            other => Err(Error::config(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Left,
    Right,
    Forward,
    Pickup,
    Drop,
    Toggle,
}

impl Action {
    pub const ALL: [Action; N_ACTIONS] = [
        Action::Left,
        Action::Right,
        Action::Forward,
        Action::Pickup,
        Action::Drop,
        Action::Toggle,
    ];

    pub fn from_index(i: usize) -> Result<Action> {
        Action::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::config(format!("action index {i} out of range")))
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

/// Egocentric 7x7 view, `tiles[row][col]`; the agent stands at column 3 of
/// the bottom row, facing the top row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub tiles: [[Tile; VIEW]; VIEW],
}

impl Observation {
    /// Flatten to 147 values in `[0, 1]`, channel-normalized.
    pub fn encode<F: Scalar>(&self) -> Array1<F> {
        let mut out = Array1::zeros(ENCODED_DIM);
        let mut at = 0;
        for row in &self.tiles {
            for t in row {
                out[at] = cast(t.obj as f64 / obj::MAX as f64);
                out[at + 1] = cast(t.color as f64 / color::MAX as f64);
                out[at + 2] = cast(t.state as f64 / door::MAX as f64);
                at += 3;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
}

const DIR_VEC: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

#[derive(Debug, Clone)]
pub struct GridEnv {
    task: Task,
    width: i32,
    height: i32,
    grid: Vec<Tile>,
    agent_pos: (i32, i32),
    agent_dir: u8,
    carrying: Option<Tile>,
    steps: u32,
    done: bool,
    success_cell: Option<(i32, i32)>,
    failure_cell: Option<(i32, i32)>,
    rng: ChaCha12Rng,
    coord_queries: u64,
}

impl GridEnv {
    pub fn new(task: Task, seed: u64) -> Result<Self> {
        let mut env = GridEnv {
            task,
            width: 0,
            height: 0,
            grid: Vec::new(),
            agent_pos: (0, 0),
            agent_dir: 0,
            carrying: None,
            steps: 0,
            done: false,
            success_cell: None,
            failure_cell: None,
            rng: ChaCha12Rng::seed_from_u64(seed),
            coord_queries: 0,
        };
        env.reset(seed)?;
        Ok(env)
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn max_steps(&self) -> u32 {
        self.task.max_steps()
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Privileged world coordinate, counted so runs can prove which agents
    /// touched it.
    pub fn agent_coord(&mut self) -> (i32, i32) {
        self.coord_queries += 1;
        self.agent_pos
    }

    pub fn coord_queries(&self) -> u64 {
        self.coord_queries
    }

    /// Generate a fresh episode layout and return the initial observation.
    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        self.rng = ChaCha12Rng::seed_from_u64(seed);
        for attempt in 0.. {
            if attempt >= 100 {
                return Err(Error::config(format!(
                    "could not generate a solvable {} layout",
                    self.task
                )));
            }
            self.carrying = None;
            self.steps = 0;
            self.done = false;
            self.success_cell = None;
            self.failure_cell = None;
            match self.task {
                Task::R6x6 => self.gen_r6x6(),
                Task::MR => self.gen_multiroom(),
                Task::Unl => self.gen_unlock(),
                Task::DK => self.gen_doorkey(),
                Task::Mem => self.gen_memory(),
            }
            if self.layout_solvable() {
                break;
            }
        }
        Ok(self.observe())
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::protocol("step on a finished episode"));
        }
        self.steps += 1;
        let mut reward = 0.0;
        let fwd = DIR_VEC[self.agent_dir as usize];
        let ahead = (self.agent_pos.0 + fwd.0, self.agent_pos.1 + fwd.1);
        match action {
            Action::Left => self.agent_dir = (self.agent_dir + 3) % 4,
            Action::Right => self.agent_dir = (self.agent_dir + 1) % 4,
            Action::Forward => {
                if self.in_bounds(ahead) && self.tile(ahead).can_overlap() {
                    self.agent_pos = ahead;
                    if self.tile(ahead).obj == obj::GOAL {
                        reward = 1.0;
                        self.done = true;
                    } else if Some(ahead) == self.success_cell {
                        reward = 1.0;
                        self.done = true;
                    } else if Some(ahead) == self.failure_cell {
                        self.done = true;
                    }
                }
            }
            Action::Pickup => {
                if self.carrying.is_none()
                    && self.in_bounds(ahead)
                    && self.tile(ahead).can_pickup()
                {
                    self.carrying = Some(self.tile(ahead));
                    self.set_tile(ahead, Tile::EMPTY);
                }
            }
            Action::Drop => {
                if let Some(held) = self.carrying {
                    if self.in_bounds(ahead) && self.tile(ahead) == Tile::EMPTY {
                        self.set_tile(ahead, held);
                        self.carrying = None;
                    }
                }
            }
            Action::Toggle => {
                if self.in_bounds(ahead) && self.tile(ahead).obj == obj::DOOR {
                    let mut t = self.tile(ahead);
                    match t.state {
                        door::LOCKED => {
                            let has_key = matches!(
                                self.carrying,
                                Some(k) if k.obj == obj::KEY && k.color == t.color
                            );
                            if has_key {
                                t.state = door::OPEN;
                                self.set_tile(ahead, t);
                                if self.task == Task::Unl {
                                    reward = 1.0;
                                    self.done = true;
                                }
                            }
                        }
                        door::CLOSED => {
                            t.state = door::OPEN;
                            self.set_tile(ahead, t);
                        }
                        _ => {
                            t.state = door::CLOSED;
                            self.set_tile(ahead, t);
                        }
                    }
                }
            }
        }
        if !self.done && self.steps >= self.max_steps() {
            self.done = true;
        }
        Ok(StepOutcome {
            obs: self.observe(),
            reward,
            done: self.done,
        })
    }

    /// The agent's current egocentric view with occlusion applied.
    pub fn observe(&self) -> Observation {
        let f = DIR_VEC[self.agent_dir as usize];
        let r = DIR_VEC[(self.agent_dir as usize + 1) % 4];
        let mut tiles = [[Tile::WALL; VIEW]; VIEW];
        for (vy, row) in tiles.iter_mut().enumerate() {
            for (vx, out) in row.iter_mut().enumerate() {
                let depth = (VIEW - 1 - vy) as i32;
                let side = vx as i32 - 3;
                let w = (
                    self.agent_pos.0 + f.0 * depth + r.0 * side,
                    self.agent_pos.1 + f.1 * depth + r.1 * side,
                );
                *out = if self.in_bounds(w) {
                    self.tile(w)
                } else {
                    Tile::WALL
                };
            }
        }
        tiles[VIEW - 1][3] = self.carrying.unwrap_or(Tile::EMPTY);

        let mut mask = [[false; VIEW]; VIEW];
        mask[VIEW - 1][3] = true;
        for y in (0..VIEW).rev() {
            for x in 0..VIEW - 1 {
                if mask[y][x] && tiles[y][x].see_behind() {
                    mask[y][x + 1] = true;
                    if y > 0 {
                        mask[y - 1][x + 1] = true;
                        mask[y - 1][x] = true;
                    }
                }
            }
            for x in (1..VIEW).rev() {
                if mask[y][x] && tiles[y][x].see_behind() {
                    mask[y][x - 1] = true;
                    if y > 0 {
                        mask[y - 1][x - 1] = true;
                        mask[y - 1][x] = true;
                    }
                }
            }
        }
        for y in 0..VIEW {
            for x in 0..VIEW {
                if !mask[y][x] {
                    tiles[y][x] = Tile::UNSEEN;
                }
            }
        }
        Observation { tiles }
    }

    /// Breadth-first search oracle: does this layout admit a solution?
    pub fn layout_solvable(&self) -> bool {
        match self.task {
            Task::R6x6 => self
                .reach(self.agent_pos, false)
                .contains(&self.find_one(obj::GOAL)),
            Task::MR => self
                .reach(self.agent_pos, false)
                .contains(&self.find_one(obj::GOAL)),
            Task::Unl => {
                let seen = self.reach(self.agent_pos, false);
                let key = self.find_one(obj::KEY);
                let d = self.find_one(obj::DOOR);
                self.adjacent_reached(&seen, key) && self.adjacent_reached(&seen, d)
            }
            Task::DK => {
                let seen = self.reach(self.agent_pos, false);
                let key = self.find_one(obj::KEY);
                if !self.adjacent_reached(&seen, key) {
                    return false;
                }
                let unlocked = self.reach(self.agent_pos, true);
                unlocked.contains(&self.find_one(obj::GOAL))
            }
            Task::Mem => {
                let seen = self.reach(self.agent_pos, false);
                seen.contains(&self.success_cell.expect("mem layout"))
                    && seen.contains(&self.failure_cell.expect("mem layout"))
            }
        }
    }

    /// Flood fill over walkable cells; closed doors count as passable (the
    /// agent can toggle them), locked doors only when `assume_key`.
    fn reach(&self, start: (i32, i32), assume_key: bool) -> Vec<(i32, i32)> {
        let mut seen = vec![false; (self.width * self.height) as usize];
        let mut queue = VecDeque::from([start]);
        seen[self.idx(start)] = true;
        let mut out = vec![start];
        while let Some(p) = queue.pop_front() {
            for d in DIR_VEC {
                let n = (p.0 + d.0, p.1 + d.1);
                if !self.in_bounds(n) || seen[self.idx(n)] {
                    continue;
                }
                let t = self.tile(n);
                let pass = t.can_overlap()
                    || (t.obj == obj::DOOR && t.state == door::CLOSED)
                    || (t.obj == obj::DOOR && t.state == door::LOCKED && assume_key);
                if pass {
                    seen[self.idx(n)] = true;
                    queue.push_back(n);
                    out.push(n);
                }
            }
        }
        out
    }

    fn adjacent_reached(&self, seen: &[(i32, i32)], target: (i32, i32)) -> bool {
        DIR_VEC
            .iter()
            .any(|d| seen.contains(&(target.0 + d.0, target.1 + d.1)))
    }

    fn find_one(&self, o: u8) -> (i32, i32) {
        for y in 0..self.height {
            for x in 0..self.width {
                if self.tile((x, y)).obj == o {
                    return (x, y);
                }
            }
        }
        (-1, -1)
    }

    fn idx(&self, p: (i32, i32)) -> usize {
        (p.1 * self.width + p.0) as usize
    }

    fn in_bounds(&self, p: (i32, i32)) -> bool {
        p.0 >= 0 && p.1 >= 0 && p.0 < self.width && p.1 < self.height
    }

    fn tile(&self, p: (i32, i32)) -> Tile {
        self.grid[self.idx(p)]
    }

    fn set_tile(&mut self, p: (i32, i32), t: Tile) {
        let i = self.idx(p);
        self.grid[i] = t;
    }

    fn blank(&mut self, w: i32, h: i32) {
        self.width = w;
        self.height = h;
        self.grid = vec![Tile::EMPTY; (w * h) as usize];
        for x in 0..w {
            self.set_tile((x, 0), Tile::WALL);
            self.set_tile((x, h - 1), Tile::WALL);
        }
        for y in 0..h {
            self.set_tile((0, y), Tile::WALL);
            self.set_tile((w - 1, y), Tile::WALL);
        }
    }

    fn random_empty_cell(&mut self, x0: i32, x1: i32, y0: i32, y1: i32) -> (i32, i32) {
        loop {
            let p = (
                self.rng.random_range(x0..=x1),
                self.rng.random_range(y0..=y1),
            );
            if self.tile(p) == Tile::EMPTY && Some(p) != Some(self.agent_pos) {
                return p;
            }
        }
    }

    fn gen_r6x6(&mut self) {
        self.blank(6, 6);
        self.set_tile((4, 4), Tile::goal());
        self.agent_pos = (-1, -1);
        self.agent_pos = self.random_empty_cell(1, 4, 1, 4);
        self.agent_dir = self.rng.random_range(0..4);
    }

    fn gen_multiroom(&mut self) {
        const SIZE: i32 = 13;
        loop {
            self.width = SIZE;
            self.height = SIZE;
            self.grid = vec![Tile::WALL; (SIZE * SIZE) as usize];
            // Chain three 4x4 rooms (2x2 interiors) in random directions.
            let mut rooms = vec![(
                self.rng.random_range(1..SIZE - 4),
                self.rng.random_range(1..SIZE - 4),
            )];
            let mut ok = true;
            while rooms.len() < 3 {
                let (px, py) = *rooms.last().unwrap();
                let d = DIR_VEC[self.rng.random_range(0..4) as usize];
                let next = (px + d.0 * 3, py + d.1 * 3);
                let fits = next.0 >= 0
                    && next.1 >= 0
                    && next.0 + 3 < SIZE
                    && next.1 + 3 < SIZE
                    && !rooms.contains(&next);
                if !fits {
                    ok = false;
                    break;
                }
                rooms.push(next);
            }
            if !ok {
                continue;
            }
            for &(rx, ry) in &rooms {
                for y in ry + 1..ry + 3 {
                    for x in rx + 1..rx + 3 {
                        self.set_tile((x, y), Tile::EMPTY);
                    }
                }
            }
            for w in rooms.windows(2) {
                let (ax, ay) = w[0];
                let (bx, by) = w[1];
                let c = self.rng.random_range(0..=color::MAX);
                let off = self.rng.random_range(1..3);
                let p = if bx > ax {
                    (bx, ay + off)
                } else if bx < ax {
                    (ax, ay + off)
                } else if by > ay {
                    (ax + off, by)
                } else {
                    (ax + off, ay)
                };
                self.set_tile(p, Tile::door(c, door::CLOSED));
            }
            let (gx, gy) = rooms[2];
            let goal = (
                self.rng.random_range(gx + 1..gx + 3),
                self.rng.random_range(gy + 1..gy + 3),
            );
            self.set_tile(goal, Tile::goal());
            let (sx, sy) = rooms[0];
            self.agent_pos = (-1, -1);
            self.agent_pos = self.random_empty_cell(sx + 1, sx + 2, sy + 1, sy + 2);
            self.agent_dir = self.rng.random_range(0..4);
            return;
        }
    }

    fn gen_unlock(&mut self) {
        self.blank(11, 6);
        for y in 1..5 {
            self.set_tile((5, y), Tile::WALL);
        }
        let c = self.rng.random_range(0..=color::MAX);
        let door_y = self.rng.random_range(1..5);
        self.set_tile((5, door_y), Tile::door(c, door::LOCKED));
        self.agent_pos = (-1, -1);
        self.agent_pos = self.random_empty_cell(1, 4, 1, 4);
        let key = self.random_empty_cell(1, 4, 1, 4);
        self.set_tile(key, Tile::key(c));
        self.agent_dir = self.rng.random_range(0..4);
    }

    fn gen_doorkey(&mut self) {
        self.blank(6, 6);
        let split = self.rng.random_range(2..4);
        for y in 1..5 {
            self.set_tile((split, y), Tile::WALL);
        }
        let door_y = self.rng.random_range(1..5);
        self.set_tile((split, door_y), Tile::door(color::YELLOW, door::LOCKED));
        self.set_tile((4, 4), Tile::goal());
        self.agent_pos = (-1, -1);
        self.agent_pos = self.random_empty_cell(1, split - 1, 1, 4);
        let key = self.random_empty_cell(1, split - 1, 1, 4);
        self.set_tile(key, Tile::key(color::YELLOW));
        self.agent_dir = self.rng.random_range(0..4);
    }

    fn gen_memory(&mut self) {
        self.width = 7;
        self.height = 7;
        self.grid = vec![Tile::WALL; 49];
        // Start room, hallway, junction with one object at each end.
        for y in 2..=4 {
            for x in 1..=3 {
                self.set_tile((x, y), Tile::EMPTY);
            }
        }
        self.set_tile((4, 3), Tile::EMPTY);
        self.set_tile((5, 3), Tile::EMPTY);
        self.set_tile((5, 2), Tile::EMPTY);
        self.set_tile((5, 4), Tile::EMPTY);
        let cue_is_key = self.rng.random::<bool>();
        let cue = if cue_is_key {
            Tile::key(color::GREEN)
        } else {
            Tile::ball(color::GREEN)
        };
        self.set_tile((1, 2), cue);
        let key_on_top = self.rng.random::<bool>();
        let (top, bottom) = if key_on_top {
            (Tile::key(color::GREEN), Tile::ball(color::GREEN))
        } else {
            (Tile::ball(color::GREEN), Tile::key(color::GREEN))
        };
        self.set_tile((5, 1), top);
        self.set_tile((5, 5), bottom);
        let match_on_top = cue_is_key == key_on_top;
        self.success_cell = Some(if match_on_top { (5, 2) } else { (5, 4) });
        self.failure_cell = Some(if match_on_top { (5, 4) } else { (5, 2) });
        self.agent_pos = (1, 3);
        self.agent_dir = 3;
    }

    /// Compact line dump of the full layout for golden tests and debugging.
    pub fn dump_layout(&self) -> String {
        let mut s = format!(
            "task={} size={}x{} agent=({},{}) dir={} steps={}\n",
            self.task, self.width, self.height, self.agent_pos.0, self.agent_pos.1,
            self.agent_dir, self.steps
        );
        for y in 0..self.height {
            let row: Vec<String> = (0..self.width)
                .map(|x| {
                    let t = self.tile((x, y));
                    format!("{}{}{}", t.obj, t.color, t.state)
                })
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// ASCII map for the CLI `--render` flag.
    pub fn render_ascii(&self) -> String {
        let mut s = String::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if (x, y) == self.agent_pos {
                    s.push(['>', 'v', '<', '^'][self.agent_dir as usize]);
                    continue;
                }
                let t = self.tile((x, y));
                s.push(match (t.obj, t.state) {
                    (obj::WALL, _) => '#',
                    (obj::EMPTY, _) => '.',
                    (obj::DOOR, door::OPEN) => '_',
                    (obj::DOOR, door::LOCKED) => 'L',
                    (obj::DOOR, _) => 'D',
                    (obj::KEY, _) => 'K',
                    (obj::BALL, _) => 'o',
                    (obj::GOAL, _) => 'G',
                    _ => '?',
                });
            }
            s.push('\n');
        }
        s
    }

    #[cfg(test)]
    pub(crate) fn agent_pose(&self) -> ((i32, i32), u8) {
        (self.agent_pos, self.agent_dir)
    }

    #[cfg(test)]
    pub(crate) fn tile_at(&self, x: i32, y: i32) -> Tile {
        self.tile((x, y))
    }

    #[cfg(test)]
    pub(crate) fn count_tiles(&self, o: u8, state: Option<u8>) -> usize {
        self.grid
            .iter()
            .filter(|t| t.obj == o && state.is_none_or(|s| t.state == s))
            .count()
    }

    #[cfg(test)]
    pub(crate) fn force_pose(&mut self, pos: (i32, i32), dir: u8) {
        self.agent_pos = pos;
        self.agent_dir = dir;
    }
}
