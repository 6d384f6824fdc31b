# Random convex analysis on finite filtered probability spaces
# Main package initialization