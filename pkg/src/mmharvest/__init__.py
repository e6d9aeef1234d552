"""Energy harvesting and SWIPT in mmWave Poisson networks: closed forms and simulation."""
