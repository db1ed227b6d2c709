"""Default tone schedule for the multi-frequency testing experiment."""

#: 30 tone frequencies in Hz spanning 1 Hz to 10 kHz, chosen so the skin
#: depth sweeps through the tube wall; all integers, so a 1 s window holds
#: a whole number of periods of every tone.
DEFAULT_TONE_HZ = (
    1, 50, 100, 150, 250, 300, 400, 600, 700, 800,
    900, 1000, 1500, 2000, 2500, 3000, 3500, 4000, 4500, 5000,
    5500, 6000, 6500, 7000, 7500, 8000, 8500, 9000, 9500, 10000,
)
