# Core algorithms: conditional expectations, risk measures, conjugation, geometry, g-expectations