use crate::env::{dist2, GoalObservation, PointEnv, TaskKind, CONTACT_RADIUS, V_MAX};

const PUSH_STANDOFF: f64 = 0.035;
const PUSH_SHIELD: f64 = 0.16;

/// Scripted demonstrator. Stateless: every action is a function of the
/// current observation, so rollouts stay reproducible.
///
/// The controllers are smooth blends of a few vector fields rather than
/// discrete plans. Smoothness matters twice: the policy self-corrects after
/// perturbations, and the state-to-action mapping it traces is easy for a
/// regression learner to fit.
pub struct OraclePolicy {
    task: TaskKind,
}

impl OraclePolicy {
    pub fn new(task: TaskKind) -> Self {
        Self { task }
    }

    pub fn for_env(env: &PointEnv) -> Self {
        Self::new(env.task())
    }

    pub fn act(&self, obs: &GoalObservation) -> Vec<f64> {
        match self.task {
            TaskKind::Reach => {
                let agent = [obs.observation[0], obs.observation[1]];
                let goal = [obs.desired_goal[0], obs.desired_goal[1]];
                steer(agent, goal).to_vec()
            }
            TaskKind::Push => self.act_push(obs),
            TaskKind::PickPlace => self.act_pickplace(obs),
        }
    }

    fn act_push(&self, obs: &GoalObservation) -> Vec<f64> {
        let agent = [obs.observation[0], obs.observation[1]];
        let obj = [obs.observation[2], obs.observation[3]];
        let goal = [obs.desired_goal[0], obs.desired_goal[1]];
        let d_goal = dist2(&goal, &obj);
        if d_goal <= f64::EPSILON {
            return vec![0.0, 0.0];
        }
        let dir = [(goal[0] - obj[0]) / d_goal, (goal[1] - obj[1]) / d_goal];

        let walls: [(f64, [f64; 2]); 4] = [
            (obj[0] + 1.0, [-1.0, 0.0]),
            (1.0 - obj[0], [1.0, 0.0]),
            (obj[1] + 1.0, [0.0, -1.0]),
            (1.0 - obj[1], [0.0, 1.0]),
        ];
        let (gap, n) = walls
            .iter()
            .min_by(|a, b| a.0.partial_cmp(&b.0).expect("gaps are finite"))
            .expect("four walls");

        // Stand just behind the object on the goal line. When a wall eats
        // that spot, slide it around the standoff circle to the nearest
        // admissible bearing instead of box-clamping — a clamped spot can
        // collapse onto the object and strand the whole field. Pushing from
        // the slid spot still works: contact transfers the agent's full
        // motion whenever it has any toward-component.
        let raw_bearing = {
            let u = [-dir[0], -dir[1]];
            let a = cross(*n, u).atan2(n[0] * u[0] + n[1] * u[1]);
            if a <= 0.0 {
                a + std::f64::consts::TAU
            } else {
                a
            }
        };
        let min_bearing = (gap / PUSH_STANDOFF).clamp(-1.0, 1.0).acos();
        let bearing = raw_bearing.clamp(min_bearing, std::f64::consts::TAU - min_bearing);
        let stand = [
            n[0] * bearing.cos() - n[1] * bearing.sin(),
            n[0] * bearing.sin() + n[1] * bearing.cos(),
        ];
        let spot = [
            (obj[0] + stand[0] * PUSH_STANDOFF).clamp(-1.0, 1.0),
            (obj[1] + stand[1] * PUSH_STANDOFF).clamp(-1.0, 1.0),
        ];
        let rel = [agent[0] - obj[0], agent[1] - obj[1]];
        let r = dist2(&agent, &obj);
        // Coincident start: step off sideways rather than along the goal
        // line, which would slide the agent through to the exactly-in-front
        // ridge where every field term is colinear.
        let e_r = if r < 1e-9 {
            [-dir[1], dir[0]]
        } else {
            [rel[0] / r, rel[1] / r]
        };

        // Engaged = in contact with the goal direction pointing at least
        // slightly into the object; then drive at the goal, easing off for an
        // exact landing. Contact transfers the agent's full motion to the
        // object, so the object tracks the drive direction no matter where on
        // its rim the push lands, and the frozen contact offset keeps
        // engagement stable throughout. When the contact is oblique (object
        // pinned on a wall with the goal along it), the drive tilts into the
        // contact just enough to keep the drag biting; the object then curls
        // off the wall as the goal bearing rotates.
        // The back threshold sits slightly negative on purpose: the drive
        // tilt below guarantees goal-ward bite for mildly oblique contact,
        // and truly frontal contact produces no drag at all, so driving from
        // there is merely a wasted step, not a setback.
        let back = -(e_r[0] * dir[0] + e_r[1] * dir[1]);
        let engage = sigmoid((0.054 - r) / 0.003) * sigmoid((back + 0.05) / 0.04);

        let spot_r = dist2(&spot, &obj);
        let b_r = if spot_r < 1e-9 {
            [-dir[0], -dir[1]]
        } else {
            [(spot[0] - obj[0]) / spot_r, (spot[1] - obj[1]) / spot_r]
        };
        // The shield field routes around the object instead of through it:
        // radial escape plus a tangential pull the short way round toward the
        // spot. It fades as the agent's bearing matches the spot's — from
        // there nothing stands between it and contact, so the attractor may
        // pull straight in.
        let align_spot = e_r[0] * b_r[0] + e_r[1] * b_r[1];
        let shield = sigmoid((PUSH_SHIELD - r) / 0.03)
            * sigmoid((0.25 - align_spot) / 0.08)
            * (1.0 - engage);
        // Orbit the short way round by default. Near a wall the short arc may
        // cross it and pin the agent, so there the rotation is chosen in cut
        // coordinates: go from the agent's bearing to the spot's bearing
        // without crossing the ray pointing at the wall.
        let mut swirl_arg = cross(e_r, b_r) / 0.3;
        let wall_w = sigmoid((0.12 - gap) / 0.02);
        if wall_w > 1e-3 {
            let bearing = |u: [f64; 2]| {
                let a = cross(*n, u).atan2(n[0] * u[0] + n[1] * u[1]);
                if a <= 0.0 {
                    a + std::f64::consts::TAU
                } else {
                    a
                }
            };
            let wall_arg = (bearing(b_r) - bearing(e_r)) / 0.5;
            swirl_arg = swirl_arg * (1.0 - wall_w) + wall_arg * wall_w;
        }
        // Constant bias so the head-on bearing is never a swirl equilibrium.
        let swirl = (swirl_arg + 0.05).tanh();
        let e_t = [-e_r[1] * swirl, e_r[0] * swirl];

        // The orbit rides a ring at a comfortable clearance: inside it the
        // radial term escapes outward, outside it pulls back in, so it never
        // fights the attractor from beyond the ring (a corner-pinned object
        // would otherwise leave the two in deadlock).
        let ring = 0.9 * ((0.11 - r) / 0.03).tanh();
        let attract = steer_line(agent, spot);
        let free = [
            attract[0] * (1.0 - shield) + (e_r[0] * ring + e_t[0] * 1.1) * shield,
            attract[1] * (1.0 - shield) + (e_r[1] * ring + e_t[1] * 1.1) * shield,
        ];
        let speed = (d_goal / V_MAX).min(1.0);
        let tilt = (0.25 - back).max(0.0);
        let drive = [dir[0] - e_r[0] * tilt, dir[1] - e_r[1] * tilt];
        let drive_n = (drive[0] * drive[0] + drive[1] * drive[1]).sqrt().max(1e-9);
        let push = [drive[0] / drive_n * speed, drive[1] / drive_n * speed];
        let mut v = [
            free[0] * (1.0 - engage) + push[0] * engage,
            free[1] * (1.0 - engage) + push[1] * engage,
        ];

        // Last-resort guard: while not committed to pushing, never move
        // toward the object from inside contact — that would drag it off
        // course. Projects out the offending component; active only in
        // states the blends above already make rare.
        if engage < 0.5 && r <= CONTACT_RADIUS * 1.01 {
            let toward = -(v[0] * e_r[0] + v[1] * e_r[1]);
            if toward > 0.0 {
                v[0] += e_r[0] * toward;
                v[1] += e_r[1] * toward;
            }
        }
        vec![v[0].clamp(-1.0, 1.0), v[1].clamp(-1.0, 1.0)]
    }

    fn act_pickplace(&self, obs: &GoalObservation) -> Vec<f64> {
        let agent = [obs.observation[0], obs.observation[1]];
        let obj = [obs.observation[2], obs.observation[3]];
        let attached = obs.observation[4] > 0.5;
        let goal = [obs.desired_goal[0], obs.desired_goal[1]];
        if attached {
            // the object rides at a fixed offset; steer by object error
            let d = dist2(&goal, &obj);
            if d <= f64::EPSILON {
                return vec![0.0, 0.0, -1.0];
            }
            let speed = (d / V_MAX).min(1.0);
            return vec![
                (goal[0] - obj[0]) / d * speed,
                (goal[1] - obj[1]) / d * speed,
                -1.0,
            ];
        }
        // Approach straight in; the gripper closes smoothly as the distance
        // shrinks, crossing to "grab" just inside the grasp radius.
        let r = dist2(&obj, &agent);
        let grip = ((r - 0.045) / 0.008).tanh();
        let v = steer_line(agent, obj);
        vec![v[0], v[1], grip]
    }
}

/// Full speed along the segment to the target until within one step, then
/// land exactly on it. Preserves direction (no per-coordinate distortion).
fn steer_line(pos: [f64; 2], target: [f64; 2]) -> [f64; 2] {
    let e = [target[0] - pos[0], target[1] - pos[1]];
    let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
    if len <= f64::EPSILON {
        [0.0, 0.0]
    } else if len <= V_MAX {
        [e[0] / V_MAX, e[1] / V_MAX]
    } else {
        [e[0] / len, e[1] / len]
    }
}

/// Proportional controller: full speed until within one step of the
/// target, then land exactly on it. Clips per coordinate, which distorts
/// diagonals toward (±1, ±1) — fine in open space, never near an object.
fn steer(pos: [f64; 2], target: [f64; 2]) -> [f64; 2] {
    [
        ((target[0] - pos[0]) / V_MAX).clamp(-1.0, 1.0),
        ((target[1] - pos[1]) / V_MAX).clamp(-1.0, 1.0),
    ]
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
