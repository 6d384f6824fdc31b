# Configuration, scenario validation, errors and timing