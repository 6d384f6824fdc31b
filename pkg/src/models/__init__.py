# Domain models: spaces, dual densities, trees, scenarios and reports