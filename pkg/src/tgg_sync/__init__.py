default_app_config = 'tgg_sync.apps.TggSyncConfig'
