//! Parses a tiny highD-layout recording held in memory and normalizes both
//! carriageways to drive towards +x.

use std::fmt::Write;

use scenario_mining::ingest::{normalize_direction, parse_recording_meta, parse_tracks};

fn main() -> scenario_mining::Result<()> {
    let meta_csv = "id,frameRate,upperLaneMarkings,lowerLaneMarkings\n\
                    1,25,8.5;12.3;16.0;19.8,24.1;27.9;31.6;35.4\n";
    let meta = parse_recording_meta(meta_csv.as_bytes())?;
    println!("recording {} at {} Hz, {} lanes per direction", meta.recording_id, meta.frame_rate, meta.lanes_per_direction);

    let mut tracks = String::from("frame,id,x,y,width,height,xVelocity,yVelocity,xAcceleration,yAcceleration,laneId\n");
    for k in 0..50 {
        let t = k as f64 * meta.dt();
        let _ = writeln!(tracks, "{},1,{:.3},25.9,4.5,1.9,30.0,0.0,0.0,0.0,6", k + 1, 10.0 + 30.0 * t);
        let _ = writeln!(tracks, "{},2,{:.3},10.2,4.5,1.9,-25.0,0.0,0.0,0.0,3", k + 1, 400.0 - 25.0 * t);
    }
    for traj in parse_tracks(tracks.as_bytes(), &meta)? {
        let norm = normalize_direction(&traj, &meta)?;
        let (a, b) = (&norm.points[0], norm.points.last().unwrap());
        println!(
            "vehicle {} ({:?}): {} frames, x {:.1} -> {:.1}, vx {:.1}",
            norm.vehicle_id,
            norm.carriageway,
            norm.len(),
            a.x,
            b.x,
            a.vx
        );
    }
    Ok(())
}
