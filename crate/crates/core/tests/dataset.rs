use std::fs;
use std::path::Path;

use blocksworld::dataset::{
    cmd_generate, cmd_stats, cmd_validate, read_annotations, read_occlusion_csv, DatasetConfig,
    FamilySet,
};
use blocksworld::viewsphere::map_to_tile;
use blocksworld::Point3;

fn config(out: &Path, views: usize) -> DatasetConfig {
    DatasetConfig {
        family: FamilySet::L2,
        views,
        max_edge: 10.0,
        resolution: 24,
        out: out.to_path_buf(),
        ..DatasetConfig::default()
    }
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn layout_counts_and_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_generate(&config(dir.path(), 10)).unwrap();
    assert_eq!(report.manifest.rows, 12 * 10);
    for obj in &report.manifest.objects {
        assert!(dir.path().join(&obj.spec).is_file());
        assert!(dir.path().join(&obj.stl).is_file());
        assert_eq!(
            fs::read_dir(dir.path().join(&obj.masks)).unwrap().count(),
            10
        );
        assert_eq!(obj.annotation_lines[1] - obj.annotation_lines[0], 10);
    }
    let rows = read_annotations(dir.path()).unwrap();
    let csv = read_occlusion_csv(dir.path()).unwrap();
    assert_eq!(rows.len(), 120);
    for r in &rows {
        let eye = Point3::new(r.camera_pose[3], r.camera_pose[7], r.camera_pose[11]);
        assert_eq!(map_to_tile(&eye).unwrap().id(), r.tile);
        assert_eq!(csv[&(r.object_id.clone(), r.view_id)], (r.tile, r.so));
        assert!((0.0..=1.0).contains(&r.so));
        assert!(
            r.bbox.is_some(),
            "the default framing keeps the object in view"
        );
    }
    assert_eq!(cmd_validate(dir.path()), Ok(()));

    let stats = cmd_stats(dir.path()).unwrap();
    assert_eq!(stats.by_class.per_group.len(), 12);
    assert_eq!(stats.by_level.per_group.len(), 3);
    assert_eq!(stats.by_class.overall.histogram.iter().sum::<usize>(), 120);
}

#[test]
fn whole_tree_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_generate(&config(a.path(), 6)).unwrap();
    cmd_generate(&config(b.path(), 6)).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.len(), tb.len());
    for (x, y) in ta.iter().zip(&tb) {
        assert_eq!(x.0, y.0);
        assert!(x.1 == y.1, "{} differs", x.0);
    }
}

#[test]
fn validation_names_the_broken_file() {
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_generate(&config(dir.path(), 3)).unwrap();
    let stl = dir.path().join(&report.manifest.objects[4].stl);
    let bytes = fs::read(&stl).unwrap();
    fs::write(&stl, &bytes[..100]).unwrap();
    let mask = dir
        .path()
        .join(&report.manifest.objects[0].masks)
        .join("0001.pgm");
    fs::remove_file(&mask).unwrap();
    let issues = cmd_validate(dir.path()).unwrap_err();
    assert!(issues.iter().any(|i| i.path == stl));
    assert!(issues.iter().any(|i| i.path == mask));
}

#[test]
fn missing_dataset_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let issues = cmd_validate(dir.path()).unwrap_err();
    assert_eq!(issues.len(), 1);
    assert!(issues[0].path.ends_with("manifest.json"));
}
