"""
Synthetic scene generator

Builds labelled 10 second soundscapes from a small vocabulary of sources so
the detectors and filters can be checked against known ground truth:

    rain         broadband noise plus Poisson-timed wideband drop clicks
    chorus       loud narrow-band noise with slow +/-2 dB amplitude drift
    chirp        short linear frequency sweeps (bird-like calls)
    rumble       band-limited low-frequency noise (wind, engines)
    noise_floor  white background noise

Every generator is a pure function of the scene spec and its seed.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from backend.audio.audio_io import AudioBuffer, Segment, write_wav
from backend.console import log, warn
from config.acoustic_constants import CANONICAL_SAMPLE_RATE, NEGATIVE_LABEL, POSITIVE_LABEL, SEGMENT_SECONDS

MAX_PRECLIP_PEAK = 4.0
SOFT_CLIP_KNEE = 0.8


class SceneSpecError(ValueError):
    """Scene spec that cannot produce a realistic recording"""


def _amplitude(level_dbfs: float) -> float:
    return 10.0 ** (level_dbfs / 20.0)


@dataclass(frozen=True)
class RainComponent:
    level_dbfs: float
    drop_rate: float = 40.0        # drops per second
    kind: str = field(default='rain', init=False)


@dataclass(frozen=True)
class ChorusComponent:
    center_hz: float
    bandwidth_hz: float
    level_dbfs: float
    modulation_db: float = 2.0
    kind: str = field(default='chorus', init=False)


@dataclass(frozen=True)
class ChirpComponent:
    f0_hz: float
    f1_hz: float
    count: int
    level_dbfs: float
    duration_s: float = 0.2
    kind: str = field(default='chirp', init=False)


@dataclass(frozen=True)
class RumbleComponent:
    low_hz: float
    high_hz: float
    level_dbfs: float
    kind: str = field(default='rumble', init=False)


@dataclass(frozen=True)
class NoiseFloorComponent:
    level_dbfs: float
    kind: str = field(default='noise_floor', init=False)


@dataclass(frozen=True)
class SceneLabels:
    rain: bool
    cicada: bool

    def label(self, task: str) -> str:
        value = getattr(self, task)
        return POSITIVE_LABEL if value else NEGATIVE_LABEL


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    components: Tuple = ()
    duration: float = SEGMENT_SECONDS
    scene_id: str = "scene"
    sample_rate: int = CANONICAL_SAMPLE_RATE

    def __post_init__(self):
        if self.seed < 0:
            raise SceneSpecError(f"seed must be non-negative, got {self.seed}")
        if self.duration <= 0:
            raise SceneSpecError(f"duration must be positive, got {self.duration}")
        object.__setattr__(self, 'components', tuple(self.components))

    def labels(self) -> SceneLabels:
        """Rain-positive iff rain is louder than every chirp; cicada-positive iff a chorus is present"""
        rains = [c.level_dbfs for c in self.components if isinstance(c, RainComponent)]
        chirps = [c.level_dbfs for c in self.components if isinstance(c, ChirpComponent)]
        rain = bool(rains) and (not chirps or max(rains) > max(chirps))
        cicada = any(isinstance(c, ChorusComponent) for c in self.components)
        return SceneLabels(rain=rain, cicada=cicada)

    def components_json(self) -> str:
        return json.dumps([asdict(c) for c in self.components], sort_keys=True)


def _band_noise(rng: np.random.Generator, n: int, sample_rate: int, low: float, high: float) -> np.ndarray:
    """Unit-RMS noise with its spectrum zeroed outside [low, high]"""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    spectrum[(freqs < low) | (freqs > high)] = 0.0
    band = np.fft.irfft(spectrum, n)
    rms = math.sqrt(float(np.mean(band ** 2)))
    return band / rms if rms > 0 else band


def _render_rain(c: RainComponent, rng, n: int, sr: int) -> np.ndarray:
    amp = _amplitude(c.level_dbfs)
    out = amp * rng.standard_normal(n)

    drops = rng.poisson(c.drop_rate * n / sr)
    for _ in range(drops):
        length = int(sr * rng.uniform(0.002, 0.005))
        start = int(rng.integers(0, max(1, n - length)))
        decay = np.exp(-np.arange(length) / (0.25 * length))
        out[start:start + length] += 3.0 * amp * decay * rng.standard_normal(length)
    return out


def _render_chorus(c: ChorusComponent, rng, n: int, sr: int) -> np.ndarray:
    low = c.center_hz - c.bandwidth_hz / 2.0
    high = c.center_hz + c.bandwidth_hz / 2.0
    band = _band_noise(rng, n, sr, low, high)

    t = np.arange(n) / sr
    rate = rng.uniform(0.2, 0.5)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    drift_db = c.modulation_db * np.sin(2.0 * math.pi * rate * t + phase)
    return _amplitude(c.level_dbfs) * band * 10.0 ** (drift_db / 20.0)


def _render_chirp(c: ChirpComponent, rng, n: int, sr: int) -> np.ndarray:
    out = np.zeros(n)
    length = int(round(c.duration_s * sr))
    if length < 2 or length > n:
        raise SceneSpecError(f"chirp duration {c.duration_s} s does not fit the scene")

    t = np.arange(length) / sr
    sweep = (c.f1_hz - c.f0_hz) / c.duration_s
    call = math.sqrt(2.0) * _amplitude(c.level_dbfs) * np.hanning(length) * np.sin(
        2.0 * math.pi * (c.f0_hz * t + 0.5 * sweep * t ** 2)
    )
    for _ in range(c.count):
        start = int(rng.integers(0, n - length + 1))
        out[start:start + length] += call
    return out


def _render_rumble(c: RumbleComponent, rng, n: int, sr: int) -> np.ndarray:
    return _amplitude(c.level_dbfs) * _band_noise(rng, n, sr, c.low_hz, c.high_hz)


def _render_floor(c: NoiseFloorComponent, rng, n: int, sr: int) -> np.ndarray:
    return _amplitude(c.level_dbfs) * rng.standard_normal(n)


_RENDERERS = {
    RainComponent: _render_rain,
    ChorusComponent: _render_chorus,
    ChirpComponent: _render_chirp,
    RumbleComponent: _render_rumble,
    NoiseFloorComponent: _render_floor,
}


def soft_clip(x: np.ndarray) -> np.ndarray:
    """Identity below the knee, tanh-compressed above it, bounded by +/-1"""
    mag = np.abs(x)
    head = 1.0 - SOFT_CLIP_KNEE
    squashed = SOFT_CLIP_KNEE + head * np.tanh((mag - SOFT_CLIP_KNEE) / head)
    return np.where(mag > SOFT_CLIP_KNEE, np.sign(x) * squashed, x)


def gen_scene(spec: SceneSpec) -> Tuple[Segment, SceneLabels]:
    """
    Render a scene.

    Component i draws from its own generator seeded with (spec.seed, i).

    Raises:
        SceneSpecError: the mix peaks above 4x full scale before clipping
    """
    n = int(round(spec.duration * spec.sample_rate))
    mix = np.zeros(n)
    for i, component in enumerate(spec.components):
        renderer = _RENDERERS.get(type(component))
        if renderer is None:
            raise SceneSpecError(f"unknown scene component {type(component).__name__}")
        rng = np.random.default_rng([spec.seed, i])
        mix += renderer(component, rng, n, spec.sample_rate)

    peak = float(np.max(np.abs(mix))) if n else 0.0
    if peak > MAX_PRECLIP_PEAK:
        raise SceneSpecError(f"scene '{spec.scene_id}' peaks at {peak:.2f}x full scale before clipping")

    audio = AudioBuffer(soft_clip(mix), spec.sample_rate)
    return Segment(audio, spec.scene_id, 0, 0.0), spec.labels()


# ─────────────────────────────────────────────
# Corpora
# ─────────────────────────────────────────────

SCENE_CLASSES = ['rain', 'cicada', 'clean']


@dataclass(frozen=True)
class CorpusScene:
    spec: SceneSpec
    scene_class: str
    segment: Segment
    labels: SceneLabels

    @property
    def scene_id(self) -> str:
        return self.spec.scene_id


def class_counts(n: int, mix: Dict[str, float]) -> Dict[str, int]:
    """
    Per-class scene counts summing to n, each within 1 of n * proportion.

    Classes not named in mix ('clean' by default) take the remainder.
    """
    unknown = [k for k in mix if k not in SCENE_CLASSES]
    if unknown:
        raise ValueError(f"Unknown scene classes: {', '.join(unknown)}. Known: {', '.join(SCENE_CLASSES)}")
    if any(p < 0 for p in mix.values()):
        raise ValueError("class proportions must be non-negative")

    proportions = {k: float(mix.get(k, 0.0)) for k in SCENE_CLASSES}
    named = sum(proportions[k] for k in SCENE_CLASSES if k in mix)
    if named > 1.0 + 1e-9:
        raise ValueError(f"class proportions sum to {named:.3f} > 1")
    if 'clean' not in mix:
        proportions['clean'] = max(0.0, 1.0 - named)

    total = sum(proportions.values())
    exact = {k: n * p / total for k, p in proportions.items()}
    counts = {k: int(math.floor(v + 1e-9)) for k, v in exact.items()}
    leftover = n - sum(counts.values())
    by_remainder = sorted(SCENE_CLASSES, key=lambda k: (-(exact[k] - counts[k]), SCENE_CLASSES.index(k)))
    for k in by_remainder[:leftover]:
        counts[k] += 1
    return counts


def _chirps(rng, count_range, band, level_range, max_level: Optional[float] = None) -> List[ChirpComponent]:
    chirps = []
    for _ in range(int(rng.integers(count_range[0], count_range[1] + 1))):
        f0, f1 = rng.uniform(band[0], band[1], size=2)
        level = float(rng.uniform(*level_range))
        if max_level is not None:
            level = min(level, max_level)
        chirps.append(ChirpComponent(
            f0_hz=float(f0), f1_hz=float(f1),
            count=int(rng.integers(2, 5)),
            level_dbfs=level,
            duration_s=float(rng.uniform(0.12, 0.3)),
        ))
    return chirps


def scene_template(scene_class: str, seed: int, scene_id: str) -> SceneSpec:
    """Randomized component list for one scene class, drawn from the scene seed"""
    rng = np.random.default_rng(seed)
    components: List = [NoiseFloorComponent(float(rng.uniform(-65.0, -50.0)))]

    if scene_class == 'rain':
        rain_level = float(rng.uniform(-26.0, -16.0))
        components.append(RainComponent(rain_level, drop_rate=float(rng.uniform(20.0, 80.0))))
        components += _chirps(rng, (0, 2), (2000.0, 8000.0), (-40.0, -25.0), max_level=rain_level - 6.0)
    elif scene_class == 'cicada':
        center = float(rng.uniform(1500.0, 4000.0))
        chorus_level = float(rng.uniform(-24.0, -14.0))
        components.append(ChorusComponent(center, float(rng.uniform(150.0, 400.0)), chorus_level))
        components += _chirps(rng, (1, 2), (5000.0, 9000.0), (chorus_level - 15.0, chorus_level - 6.0))
    elif scene_class == 'clean':
        components += _chirps(rng, (1, 3), (2000.0, 9000.0), (-30.0, -12.0))
        if rng.uniform() < 0.4:
            components.append(RumbleComponent(
                float(rng.uniform(50.0, 200.0)), float(rng.uniform(800.0, 1500.0)), float(rng.uniform(-30.0, -16.0))
            ))
        if rng.uniform() < 0.3:
            loudest = max(c.level_dbfs for c in components if isinstance(c, ChirpComponent))
            components.append(RainComponent(loudest - float(rng.uniform(12.0, 20.0)), drop_rate=float(rng.uniform(10.0, 40.0))))
    else:
        raise ValueError(f"Unknown scene class '{scene_class}'. Known: {', '.join(SCENE_CLASSES)}")

    return SceneSpec(seed=seed, components=tuple(components), scene_id=scene_id)


def gen_corpus(n: int, seed: int, mix: Optional[Dict[str, float]] = None) -> List[CorpusScene]:
    """
    Generate a reproducible labelled corpus.

    Args:
        n: number of scenes (>= 1; at least 20 for meaningful 10-fold CV)
        seed: corpus seed
        mix: class proportions, e.g. {'rain': 0.3, 'cicada': 0.3}; the rest is clean

    Returns:
        Scenes in corpus order, ids scene_0000, scene_0001, ...
    """
    if n < 1:
        raise ValueError(f"corpus size must be at least 1, got {n}")
    if n < 20:
        warn("Synth", f"corpus of {n} scenes is too small for 10-fold cross-validation")
    mix = {'rain': 0.3, 'cicada': 0.3} if mix is None else mix

    counts = class_counts(n, mix)
    classes = [k for k in SCENE_CLASSES for _ in range(counts[k])]
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    scene_seeds = rng.integers(0, 2 ** 31 - 1, size=n)

    corpus = []
    for i in range(n):
        scene_class = classes[order[i]]
        spec = scene_template(scene_class, int(scene_seeds[i]), f"scene_{i:04d}")
        segment, labels = gen_scene(spec)
        corpus.append(CorpusScene(spec=spec, scene_class=scene_class, segment=segment, labels=labels))

    log("Synth", f"Generated {n} scenes: " + ", ".join(f"{k}={counts[k]}" for k in SCENE_CLASSES))
    return corpus


def manifest_frame(corpus: List[CorpusScene], paths: Optional[List[str]] = None) -> pd.DataFrame:
    rows = []
    for i, scene in enumerate(corpus):
        rows.append({
            'scene_id': scene.scene_id,
            'seed': scene.spec.seed,
            'scene_class': scene.scene_class,
            'rain': scene.labels.label('rain'),
            'cicada': scene.labels.label('cicada'),
            'components': scene.spec.components_json(),
            'path': paths[i] if paths else f"{scene.scene_id}.wav",
        })
    return pd.DataFrame(rows, columns=['scene_id', 'seed', 'scene_class', 'rain', 'cicada', 'components', 'path'])


def write_corpus(corpus: List[CorpusScene], out_dir: Union[str, Path]) -> Path:
    """Write one WAV per scene plus manifest.csv; returns the manifest path"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for scene in corpus:
        name = f"{scene.scene_id}.wav"
        write_wav(scene.segment.audio, out_dir / name)
        paths.append(name)
    manifest = out_dir / "manifest.csv"
    manifest_frame(corpus, paths).to_csv(manifest, index=False, float_format='%.17g', lineterminator='\n')
    return manifest
