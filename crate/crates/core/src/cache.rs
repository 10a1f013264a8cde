use std::collections::HashMap;
use std::hash::Hash;
use std::sync::{Arc, RwLock};

/// Process-wide memo table. Readers share the lock; a value is computed
/// outside the lock and the first one published for a key wins.
pub(crate) struct Memo<K, V> {
    map: RwLock<HashMap<K, Arc<V>>>,
}

impl<K: Eq + Hash + Clone, V> Memo<K, V> {
    pub(crate) fn new() -> Self {
        Memo {
            map: RwLock::new(HashMap::new()),
        }
    }

    pub(crate) fn get_or_try_insert<E>(
        &self,
        key: &K,
        compute: impl FnOnce() -> Result<V, E>,
    ) -> Result<Arc<V>, E> {
        if let Some(v) = self.map.read().unwrap().get(key) {
            return Ok(Arc::clone(v));
        }
        let value = Arc::new(compute()?);
        let mut map = self.map.write().unwrap();
        Ok(Arc::clone(map.entry(key.clone()).or_insert(value)))
    }

    pub(crate) fn get_or_insert(&self, key: &K, compute: impl FnOnce() -> V) -> Arc<V> {
        self.get_or_try_insert::<std::convert::Infallible>(key, || Ok(compute()))
            .unwrap_or_else(|e| match e {})
    }
}
