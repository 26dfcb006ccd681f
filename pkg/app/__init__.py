# Sync/async Schwarz solver workbench
