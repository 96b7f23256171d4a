//! Writes the scripted two-actor detection stream to stdout.
//!
//! ```text
//! cargo run -p gest-core --example two_actor_fixture > fixtures/two_actor/detections.ndjson
//! ```
//!
//! Person A sits at a desk, reads a book, then writes on paper; its tracker id
//! switches from 1 to 7 after a short dropout. Person B walks in on the far
//! side of the room while A writes, leaves the frame briefly and comes back
//! under a new tracker id. The stream also carries low-confidence actions,
//! a short spurious action, a distant laptop and some rarely seen objects.

use gest_core::ingest::{
    write_video_record, ActionDetection, FrameRecord, HsvSample, ObjectDetection, ObjectSource, PersonDetection, VideoMeta,
};
use gest_core::BBox;

const FRAMES: u32 = 300;

/// Deterministic jitter in `[-1, 1]`.
fn wobble(frame: u32, salt: u32) -> f64 {
    let x = frame.wrapping_mul(2_654_435_761).wrapping_add(salt.wrapping_mul(40_503)) % 1000;
    x as f64 / 500.0 - 1.0
}

fn samples(base_hue: f64, frame: u32) -> Vec<HsvSample> {
    (0..12)
        .map(|i| {
            let j = wobble(frame, i + 17);
            HsvSample::new(
                (base_hue + 6.0 * j).rem_euclid(360.0),
                0.70 + 0.05 * j,
                0.55 + 0.04 * wobble(frame, i + 91),
            )
        })
        .collect()
}

fn person(track_id: u32, bbox: BBox, depth: f64, hue: f64, frame: u32) -> PersonDetection {
    PersonDetection {
        track_id,
        bbox,
        mean_depth: Some(depth),
        pixel_samples: Some(samples(hue, frame)),
    }
}

fn action(track_id: u32, label: &str, confidence: f64, bbox: BBox) -> ActionDetection {
    ActionDetection {
        track_id,
        label: label.into(),
        confidence,
        bbox,
    }
}

fn object(label: &str, bbox: BBox, depth: f64, source: ObjectSource) -> ObjectDetection {
    ObjectDetection {
        label: label.into(),
        bbox,
        mean_depth: Some(depth),
        source,
    }
}

fn main() -> std::io::Result<()> {
    let meta = VideoMeta {
        video_id: "two_actor".into(),
        fps: 30.0,
        width: 640,
        height: 480,
        scene_label: Some("office".into()),
    };

    let mut frames = Vec::new();
    for f in 0..FRAMES {
        let mut rec = FrameRecord::empty(f);
        let dx = 1.5 * wobble(f, 1);

        // person A: track 1 until frame 149, unseen for 150..=152, then track 7
        let a_track = match f {
            0..=149 => Some(1),
            150..=152 => None,
            _ => Some(7),
        };
        if let Some(t) = a_track {
            let shift = if t == 7 { 2.0 } else { 0.0 };
            let b = BBox::new(100.0 + dx + shift, 150.0, 220.0 + dx + shift, 420.0);
            rec.persons.push(person(t, b, 0.40, 10.0, f));
            if f <= 60 && f != 20 && f != 41 {
                rec.actions.push(action(t, "read", 0.86 + 0.05 * wobble(f, 2), b));
            }
            if (70..FRAMES).contains(&f) && f != 180 {
                rec.actions.push(action(t, "write", 0.88 + 0.05 * wobble(f, 3), b));
            }
            // a spurious action seen on two frames only
            if f == 30 || f == 31 {
                rec.actions.push(action(t, "stand", 0.80, b));
            }
            // plausible but never confident enough
            rec.actions.push(action(t, "sit", 0.70 + 0.04 * wobble(f, 4), b));
        }

        // person B: track 3 for 220..=250, out of view for 251..=265, track 9 until 290
        let b_track = match f {
            220..=250 => Some((3, 470.0)),
            266..=290 => Some((9, 500.0)),
            _ => None,
        };
        if let Some((t, x)) = b_track {
            let b = BBox::new(x + dx, 140.0, x + 100.0 + dx, 410.0);
            rec.persons.push(person(t, b, 0.45, 220.0, f));
            rec.actions.push(action(t, "walk", 0.82 + 0.05 * wobble(f, 5), b));
        }

        if f <= 62 {
            rec.objects.push(object("book", BBox::new(180.0, 260.0, 240.0, 320.0), 0.42, ObjectSource::Detector));
        }
        if f < 10 {
            rec.objects.push(object("cup", BBox::new(150.0, 300.0, 210.0, 350.0), 0.41, ObjectSource::Detector));
        }
        if f >= 68 {
            rec.objects.push(object("paper", BBox::new(150.0, 280.0, 250.0, 340.0), 0.40, ObjectSource::Segmentation));
        }
        if (100..=110).contains(&f) {
            rec.objects.push(object("phone", BBox::new(170.0, 300.0, 230.0, 360.0), 0.42, ObjectSource::Detector));
        }
        // close in the image, far behind the actor
        rec.objects.push(object("laptop", BBox::new(140.0, 250.0, 240.0, 330.0), 0.85, ObjectSource::Detector));
        rec.objects.push(object("chair", BBox::new(20.0, 300.0, 90.0, 470.0), 0.38, ObjectSource::Segmentation));

        frames.push(rec);
    }

    let stdout = std::io::stdout();
    write_video_record(stdout.lock(), &meta, &frames)
}
